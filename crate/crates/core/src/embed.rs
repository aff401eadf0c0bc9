//! Fingerprint embedding.
//!
//! Each n-sample frame gets the user's group code added at the user's cyclic
//! delay, scaled by the sample's own magnitude: sample `p` becomes
//! `x[p] + alpha * |x[p]| * code[(p - d) mod n]`, i.e. code chip `k` lands at
//! position `(k + d) mod n`. The improved scheme adds the shared sync code
//! the same way at its fixed base delay. The code repeats frame by frame over
//! the stream; a trailing partial frame is passed through untouched since a
//! truncated code breaks the correlation model. Samples are never clamped
//! here, which keeps collusion averaging exactly linear.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assignment::{assign_user, SchemeParams};
use crate::codebook::{Codebook, FingerprintCode, SyncCode};
use crate::error::{Error, Result};
use crate::sample::Sample;
use crate::signal::Signal;

/// Which embedding (and matching detection) rule to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Group code only, distinguished by delay.
    Original,
    /// Group code plus the shared synchronization code.
    Improved,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Original => write!(f, "original"),
            Scheme::Improved => write!(f, "improved"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Scheme::Original),
            "improved" => Ok(Scheme::Improved),
            other => Err(Error::InvalidParams(format!(
                "unknown scheme {other:?} (expected \"original\" or \"improved\")"
            ))),
        }
    }
}

/// One embedding request: user, scheme, parameters, and the code set.
#[derive(Debug, Clone)]
pub struct EmbedSpec<'a, S> {
    pub user: usize,
    pub scheme: Scheme,
    pub params: SchemeParams,
    pub codebook: &'a Codebook<S>,
}

fn check_frame<S: Sample>(frame: &[S], code: &FingerprintCode<S>, delay: usize) -> Result<usize> {
    let n = code.samples.len();
    if frame.len() != n {
        return Err(Error::LengthMismatch {
            left: frame.len(),
            right: n,
        });
    }
    if delay >= n {
        return Err(Error::DelayOutOfRange {
            delay,
            frame_len: n,
        });
    }
    Ok(n)
}

/// Embed one frame under the original rule.
pub fn embed_frame_original<S: Sample>(
    frame: &[S],
    code: &FingerprintCode<S>,
    delay: usize,
    alpha: f64,
) -> Result<Vec<S>> {
    let n = check_frame(frame, code, delay)?;
    let a = S::from_f64_lossy(alpha);
    let mut out = Vec::with_capacity(n);
    for (p, &x) in frame.iter().enumerate() {
        let chip = code.samples[(p + n - delay) % n];
        out.push(x + a * x.abs() * chip);
    }
    Ok(out)
}

/// Embed one frame under the improved rule: group code at the user's delay
/// plus the sync code at its base delay, both at the same strength.
pub fn embed_frame_improved<S: Sample>(
    frame: &[S],
    code: &FingerprintCode<S>,
    delay: usize,
    sync: &SyncCode<S>,
    alpha: f64,
) -> Result<Vec<S>> {
    let n = check_frame(frame, code, delay)?;
    if sync.samples.len() != n {
        return Err(Error::LengthMismatch {
            left: sync.samples.len(),
            right: n,
        });
    }
    let a = S::from_f64_lossy(alpha);
    let mut out = Vec::with_capacity(n);
    for (p, &x) in frame.iter().enumerate() {
        let chip = code.samples[(p + n - delay) % n];
        let sync_chip = sync.samples[(p + n - sync.base_delay) % n];
        // Factored so that opposite chips cancel exactly.
        out.push(x + a * x.abs() * (chip + sync_chip));
    }
    Ok(out)
}

fn check_codebook<S: Sample>(codebook: &Codebook<S>, params: &SchemeParams) -> Result<()> {
    if codebook.code_len != params.frame_len {
        return Err(Error::CodebookMismatch(format!(
            "code length {} != frame length {}",
            codebook.code_len, params.frame_len
        )));
    }
    if codebook.group_count() != params.group_count {
        return Err(Error::CodebookMismatch(format!(
            "{} codes != {} groups",
            codebook.group_count(),
            params.group_count
        )));
    }
    Ok(())
}

/// Embed a whole stream for one user: every complete frame carries the
/// user's code; a trailing partial frame passes through unmodified.
pub fn embed_stream<S: Sample>(signal: &Signal<S>, spec: &EmbedSpec<'_, S>) -> Result<Signal<S>> {
    spec.params.validate()?;
    check_codebook(spec.codebook, &spec.params)?;
    let n = spec.params.frame_len;
    if signal.len() < n {
        return Err(Error::SignalTooShort {
            needed: n,
            got: signal.len(),
        });
    }

    let assignment = assign_user(spec.user, &spec.params)?;
    let code = &spec.codebook.codes[assignment.group];
    debug_assert_eq!(code.group_id, assignment.group);

    let mut out = Vec::with_capacity(signal.len());
    let mut chunks = signal.samples.chunks_exact(n);
    for frame in chunks.by_ref() {
        let embedded = match spec.scheme {
            Scheme::Original => {
                embed_frame_original(frame, code, assignment.delay, spec.params.alpha)?
            }
            Scheme::Improved => embed_frame_improved(
                frame,
                code,
                assignment.delay,
                &spec.codebook.sync,
                spec.params.alpha,
            )?,
        };
        out.extend(embedded);
    }
    out.extend_from_slice(chunks.remainder());

    Ok(Signal::new(out, signal.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::{synth_signal, SynthKind};
    use crate::codebook::generate_codebook;
    use crate::signal::snr_db;

    fn bipolar_code(samples: Vec<f64>) -> FingerprintCode<f64> {
        FingerprintCode {
            group_id: 0,
            samples,
            seed: 0,
        }
    }

    #[test]
    fn perturbation_follows_the_rule() {
        let code = bipolar_code(vec![1.0, -1.0]);
        let out = embed_frame_original(&[0.5, -0.4], &code, 0, 0.05).unwrap();
        assert!((out[0] - 0.525).abs() < 1e-15);
        // x = -0.4 with chip -1: -0.4 + 0.05 * 0.4 * (-1) = -0.42
        assert!((out[1] - -0.42).abs() < 1e-15);
    }

    #[test]
    fn silence_stays_silent() {
        let code = bipolar_code(vec![1.0, 1.0, -1.0, -1.0]);
        let out = embed_frame_original(&[0.0; 4], &code, 2, 0.05).unwrap();
        assert_eq!(out, vec![0.0; 4]);
    }

    #[test]
    fn improved_rule_adds_both_terms() {
        let code = bipolar_code(vec![1.0, 1.0]);
        let sync = SyncCode {
            samples: vec![1.0, 1.0],
            base_delay: 0,
            seed: 0,
        };
        let out = embed_frame_improved(&[0.5, 0.5], &code, 0, &sync, 0.05).unwrap();
        assert!(out.iter().all(|v| (v - 0.55).abs() < 1e-15));
    }

    #[test]
    fn opposite_codes_cancel_exactly() {
        let code = bipolar_code(vec![-1.0; 8]);
        let sync = SyncCode {
            samples: vec![1.0; 8],
            base_delay: 0,
            seed: 0,
        };
        let x: Vec<f64> = (0..8).map(|i| 0.1 * i as f64 - 0.35).collect();
        let out = embed_frame_improved(&x, &code, 0, &sync, 0.05).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn delay_equals_cyclic_right_rotation_of_the_code() {
        let book = generate_codebook::<f64>(1, 64, 3, 1.0).unwrap();
        let code = &book.codes[0];
        let x = synth_signal::<f64>(SynthKind::Noise, 64, 44100, 9).samples;
        let delay = 17;
        let delayed = embed_frame_original(&x, code, delay, 0.05).unwrap();

        let rotated: Vec<f64> = (0..64)
            .map(|p| code.samples[(p + 64 - delay) % 64])
            .collect();
        let rotated_code = bipolar_code(rotated);
        let direct = embed_frame_original(&x, &rotated_code, 0, 0.05).unwrap();
        assert_eq!(delayed, direct);
    }

    #[test]
    fn frame_errors() {
        let code = bipolar_code(vec![1.0, -1.0]);
        assert!(matches!(
            embed_frame_original(&[0.5], &code, 0, 0.05),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            embed_frame_original(&[0.5, 0.5], &code, 2, 0.05),
            Err(Error::DelayOutOfRange { .. })
        ));
    }

    fn default_setup() -> (Codebook<f64>, SchemeParams) {
        let params = SchemeParams::default();
        let book = generate_codebook::<f64>(params.group_count, params.frame_len, 42, 0.2).unwrap();
        (book, params)
    }

    #[test]
    fn stream_embeds_complete_frames_and_passes_tail_through() {
        let (book, params) = default_setup();
        let spec = EmbedSpec {
            user: 11,
            scheme: Scheme::Original,
            params,
            codebook: &book,
        };

        let exact = synth_signal::<f64>(SynthKind::Noise, 4096, 44100, 1);
        let out = embed_stream(&exact, &spec).unwrap();
        assert_eq!(out.len(), 4096);
        // Every frame carries the watermark.
        for f in 0..4 {
            assert!(
                out.samples[f * 1024..(f + 1) * 1024] != exact.samples[f * 1024..(f + 1) * 1024]
            );
        }

        let ragged = synth_signal::<f64>(SynthKind::Noise, 4100, 44100, 1);
        let out = embed_stream(&ragged, &spec).unwrap();
        assert_eq!(out.len(), 4100);
        assert_eq!(&out.samples[4096..], &ragged.samples[4096..]);

        let short = synth_signal::<f64>(SynthKind::Noise, 1023, 44100, 1);
        assert!(matches!(
            embed_stream(&short, &spec),
            Err(Error::SignalTooShort { .. })
        ));
    }

    #[test]
    fn distortion_is_bounded_by_alpha() {
        let (book, params) = default_setup();
        let x = synth_signal::<f64>(SynthKind::Noise, 8192, 44100, 4);
        for scheme in [Scheme::Original, Scheme::Improved] {
            let spec = EmbedSpec {
                user: 33,
                scheme,
                params,
                codebook: &book,
            };
            let y = embed_stream(&x, &spec).unwrap();
            let factor = match scheme {
                Scheme::Original => 1.0,
                Scheme::Improved => 2.0,
            };
            for (&xs, &ys) in x.samples.iter().zip(&y.samples) {
                let bound = factor * params.alpha * xs.abs();
                assert!(
                    (ys - xs).abs() <= bound * (1.0 + 1e-12),
                    "distortion {} exceeds bound {}",
                    (ys - xs).abs(),
                    bound
                );
            }
        }
    }

    #[test]
    fn changing_one_frame_only_changes_that_frame() {
        let (book, params) = default_setup();
        let spec = EmbedSpec {
            user: 7,
            scheme: Scheme::Improved,
            params,
            codebook: &book,
        };
        let x = synth_signal::<f64>(SynthKind::Noise, 4096, 44100, 5);
        let mut x2 = x.clone();
        for v in &mut x2.samples[2048..3072] {
            *v = -*v * 0.9;
        }
        let y = embed_stream(&x, &spec).unwrap();
        let y2 = embed_stream(&x2, &spec).unwrap();
        assert_eq!(&y.samples[..2048], &y2.samples[..2048]);
        assert_ne!(&y.samples[2048..3072], &y2.samples[2048..3072]);
        assert_eq!(&y.samples[3072..], &y2.samples[3072..]);
    }

    #[test]
    fn measured_snr_matches_the_closed_form() {
        let (book, params) = default_setup();
        let spec = EmbedSpec {
            user: 11,
            scheme: Scheme::Original,
            params,
            codebook: &book,
        };
        // Exact multiple of the frame length: every sample is embedded, so
        // the per-sample relative perturbation is exactly alpha.
        let x = synth_signal::<f64>(SynthKind::Noise, 65536, 44100, 2);
        let y = embed_stream(&x, &spec).unwrap();
        let measured = snr_db(&x, &y).unwrap();
        let expected = -20.0 * params.alpha.log10();
        assert!(
            (measured - expected).abs() < 1e-9,
            "measured {measured} dB vs closed form {expected} dB"
        );
    }

    #[test]
    fn f32_pipeline_behaves_the_same() {
        let params = SchemeParams::default();
        let book = generate_codebook::<f32>(params.group_count, params.frame_len, 42, 0.2).unwrap();
        let spec = EmbedSpec {
            user: 11,
            scheme: Scheme::Original,
            params,
            codebook: &book,
        };
        let x = synth_signal::<f32>(SynthKind::Noise, 16384, 44100, 2);
        let y = embed_stream(&x, &spec).unwrap();
        let measured = snr_db(&x, &y).unwrap();
        let expected = -20.0 * params.alpha.log10();
        assert!((measured - expected).abs() < 1e-3);
    }
}
