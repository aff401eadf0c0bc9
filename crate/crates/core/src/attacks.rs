//! The adversary: collusion combinations and desynchronization attacks.
//!
//! Colluders merge their copies per-sample (average or min-max) to dilute the
//! fingerprints. Desynchronization then crops a block out of the audio or
//! inserts silence, moving every embedded code's detected delay by the same
//! offset modulo the frame length: a head-shift of `c` samples moves peaks by
//! `+c`, a head-crop by `-c`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Sample;
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Crop,
    Shift,
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackKind::Crop => write!(f, "crop"),
            AttackKind::Shift => write!(f, "shift"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackPosition {
    Head,
    AtOffset(usize),
}

/// One concrete desynchronization attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Attack magnitude in samples; must be >= 1.
    pub amount: usize,
    pub position: AttackPosition,
}

/// Apply an attack spec to a signal.
pub fn apply_attack<S: Sample>(signal: &Signal<S>, spec: &AttackSpec) -> Result<Signal<S>> {
    if spec.amount == 0 {
        return Err(Error::InvalidParams("attack amount must be >= 1".into()));
    }
    let offset = match spec.position {
        AttackPosition::Head => 0,
        AttackPosition::AtOffset(q) => q,
    };
    match spec.kind {
        AttackKind::Crop => crop(signal, spec.amount, offset),
        AttackKind::Shift => time_shift(signal, spec.amount, offset),
    }
}

/// Per-sample arithmetic mean of two or more equal-length copies.
pub fn collude_average<S: Sample>(copies: &[Signal<S>]) -> Result<Signal<S>> {
    check_copies(copies)?;
    let count = S::from_f64_lossy(copies.len() as f64);
    let len = copies[0].len();
    let mut out = vec![S::zero(); len];
    for copy in copies {
        for (acc, &v) in out.iter_mut().zip(&copy.samples) {
            *acc = *acc + v;
        }
    }
    for v in &mut out {
        *v = *v / count;
    }
    Ok(Signal::new(out, copies[0].sample_rate))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinMaxMode {
    Min,
    Max,
    /// (min + max) / 2 per sample.
    Midpoint,
}

/// Per-sample min, max, or min-max midpoint of the copies.
pub fn collude_minmax<S: Sample>(copies: &[Signal<S>], mode: MinMaxMode) -> Result<Signal<S>> {
    check_copies(copies)?;
    let len = copies[0].len();
    let two = S::from_f64_lossy(2.0);
    let mut out = Vec::with_capacity(len);
    for p in 0..len {
        let mut lo = copies[0].samples[p];
        let mut hi = lo;
        for copy in &copies[1..] {
            let v = copy.samples[p];
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        out.push(match mode {
            MinMaxMode::Min => lo,
            MinMaxMode::Max => hi,
            MinMaxMode::Midpoint => (lo + hi) / two,
        });
    }
    Ok(Signal::new(out, copies[0].sample_rate))
}

fn check_copies<S: Sample>(copies: &[Signal<S>]) -> Result<()> {
    if copies.len() < 2 {
        return Err(Error::TooFewSignals {
            needed: 2,
            got: copies.len(),
        });
    }
    let len = copies[0].len();
    for copy in &copies[1..] {
        if copy.len() != len {
            return Err(Error::LengthMismatch {
                left: len,
                right: copy.len(),
            });
        }
    }
    Ok(())
}

/// Cut the block `[offset, offset + amount)` out of the signal; everything
/// after it moves earlier by `amount`.
pub fn crop<S: Sample>(signal: &Signal<S>, amount: usize, offset: usize) -> Result<Signal<S>> {
    let len = signal.len();
    if offset > len || amount > len - offset {
        return Err(Error::AttackOutOfRange {
            offset,
            amount,
            len,
        });
    }
    let mut out = Vec::with_capacity(len - amount);
    out.extend_from_slice(&signal.samples[..offset]);
    out.extend_from_slice(&signal.samples[offset + amount..]);
    Ok(Signal::new(out, signal.sample_rate))
}

/// Insert `amount` zero samples at `offset`; everything after it moves later.
pub fn time_shift<S: Sample>(
    signal: &Signal<S>,
    amount: usize,
    offset: usize,
) -> Result<Signal<S>> {
    if amount == 0 {
        return Err(Error::InvalidParams("shift amount must be >= 1".into()));
    }
    let len = signal.len();
    if offset > len {
        return Err(Error::AttackOutOfRange {
            offset,
            amount,
            len,
        });
    }
    let mut out = Vec::with_capacity(len + amount);
    out.extend_from_slice(&signal.samples[..offset]);
    out.extend(std::iter::repeat_n(S::zero(), amount));
    out.extend_from_slice(&signal.samples[offset..]);
    Ok(Signal::new(out, signal.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::{synth_signal, SynthKind};
    use proptest::prelude::*;

    fn sig(samples: Vec<f64>) -> Signal<f64> {
        Signal::new(samples, 44100)
    }

    #[test]
    fn average_of_identical_copies_is_the_copy() {
        let y = sig(vec![0.25, -0.5, 0.75]);
        let merged = collude_average(&[y.clone(), y.clone()]).unwrap();
        assert_eq!(merged, y);
    }

    #[test]
    fn average_of_two_copies() {
        let merged = collude_average(&[sig(vec![1.0, 0.0]), sig(vec![0.0, 1.0])]).unwrap();
        assert_eq!(merged.samples, vec![0.5, 0.5]);
    }

    #[test]
    fn average_rejects_bad_inputs() {
        assert!(matches!(
            collude_average(&[sig(vec![1.0])]),
            Err(Error::TooFewSignals { .. })
        ));
        assert!(matches!(
            collude_average(&[sig(vec![1.0]), sig(vec![1.0, 2.0])]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn minmax_modes() {
        let a = sig(vec![-1.0, 2.0]);
        let b = sig(vec![0.0, 1.0]);
        assert_eq!(
            collude_minmax(&[a.clone(), b.clone()], MinMaxMode::Max)
                .unwrap()
                .samples,
            vec![0.0, 2.0]
        );
        assert_eq!(
            collude_minmax(&[a.clone(), a.clone()], MinMaxMode::Min).unwrap(),
            a
        );
        // For two copies the midpoint is exactly the average.
        let mid = collude_minmax(&[a.clone(), b.clone()], MinMaxMode::Midpoint).unwrap();
        let avg = collude_average(&[a, b]).unwrap();
        assert_eq!(mid, avg);
    }

    #[test]
    fn crop_removes_the_block() {
        let y = synth_signal::<f64>(SynthKind::Noise, 100, 44100, 1);
        let cropped = crop(&y, 20, 0).unwrap();
        assert_eq!(cropped.len(), 80);
        assert_eq!(cropped.samples[..], y.samples[20..]);

        let mid = crop(&y, 10, 40).unwrap();
        assert_eq!(mid.samples[..40], y.samples[..40]);
        assert_eq!(mid.samples[40..], y.samples[50..]);

        let all = crop(&y, 100, 0).unwrap();
        assert!(all.is_empty());

        assert!(matches!(
            crop(&y, 101, 0),
            Err(Error::AttackOutOfRange { .. })
        ));
        assert!(matches!(
            crop(&y, 10, 95),
            Err(Error::AttackOutOfRange { .. })
        ));
    }

    #[test]
    fn shift_inserts_zeros() {
        let shifted = time_shift(&sig(vec![1.0, 2.0]), 1, 1).unwrap();
        assert_eq!(shifted.samples, vec![1.0, 0.0, 2.0]);

        assert!(matches!(
            time_shift(&sig(vec![1.0]), 0, 0),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            time_shift(&sig(vec![1.0]), 1, 2),
            Err(Error::AttackOutOfRange { .. })
        ));
    }

    #[test]
    fn head_shift_then_head_crop_is_identity() {
        let y = synth_signal::<f64>(SynthKind::Noise, 256, 44100, 3);
        for amount in [1usize, 7, 64] {
            let round_trip = crop(&time_shift(&y, amount, 0).unwrap(), amount, 0).unwrap();
            assert_eq!(round_trip, y);
        }
    }

    #[test]
    fn apply_attack_dispatches() {
        let y = synth_signal::<f64>(SynthKind::Noise, 64, 44100, 5);
        let spec = AttackSpec {
            kind: AttackKind::Shift,
            amount: 3,
            position: AttackPosition::AtOffset(10),
        };
        let out = apply_attack(&y, &spec).unwrap();
        assert_eq!(out.len(), 67);
        assert_eq!(out.samples[10..13], [0.0, 0.0, 0.0]);

        let zero = AttackSpec {
            kind: AttackKind::Crop,
            amount: 0,
            position: AttackPosition::Head,
        };
        assert!(apply_attack(&y, &zero).is_err());
    }

    proptest! {
        #[test]
        fn average_of_embedded_copies_is_the_mean_watermark(seed in 0u64..200) {
            // Embedding is additive and unclamped, so averaging two marked
            // copies must equal the original plus the per-sample mean of
            // the watermark terms recomputed straight from the codebook.
            use crate::assignment::{assign_user, SchemeParams};
            use crate::codebook::generate_codebook;
            use crate::embed::{embed_stream, EmbedSpec, Scheme};

            let params = SchemeParams::new(2, 2, 64, 8, 0.05).unwrap();
            let book = generate_codebook::<f64>(2, 64, seed, 1.0).unwrap();
            let x = synth_signal::<f64>(SynthKind::Noise, 128, 44100, seed + 1);
            let users = [0usize, 3];
            let copies: Vec<_> = users
                .iter()
                .map(|&user| {
                    embed_stream(&x, &EmbedSpec {
                        user,
                        scheme: Scheme::Original,
                        params,
                        codebook: &book,
                    })
                    .unwrap()
                })
                .collect();
            let avg = collude_average(&copies).unwrap();

            for (p, (&xs, &avgs)) in x.samples.iter().zip(&avg.samples).enumerate() {
                let mean_term: f64 = users
                    .iter()
                    .map(|&user| {
                        let a = assign_user(user, &params).unwrap();
                        let chip = book.codes[a.group].samples[(p % 64 + 64 - a.delay) % 64];
                        0.05 * xs.abs() * chip
                    })
                    .sum::<f64>()
                    / 2.0;
                prop_assert!((avgs - (xs + mean_term)).abs() <= 1e-15);
            }
        }
    }
}
