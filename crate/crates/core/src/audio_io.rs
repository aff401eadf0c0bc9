//! WAV file I/O and synthetic test inputs.
//!
//! Only mono 16-bit PCM is accepted; anything else is an explicit
//! unsupported-format error rather than a silent conversion. Integer samples
//! map to reals as `v / 32768`; writing clamps to `[-1, 32767/32768]` and
//! rounds half away from zero.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Sample;
use crate::seeds;
use crate::signal::Signal;

/// Map a 16-bit PCM sample into the real domain.
pub fn dequantize<S: Sample>(v: i16) -> S {
    S::from_f64_lossy(v as f64) / S::from_f64_lossy(32768.0)
}

/// Map a real sample to 16-bit PCM: clamp to `[-1, 32767/32768]`, scale by
/// 32768, round half away from zero. Total: out-of-range amplitudes clamp,
/// non-finite values collapse to 0.
pub fn quantize<S: Sample>(v: S) -> i16 {
    if !v.is_finite() {
        return 0;
    }
    let hi = S::from_f64_lossy(32767.0) / S::from_f64_lossy(32768.0);
    let clamped = if v > hi {
        hi
    } else if v < -S::one() {
        -S::one()
    } else {
        v
    };
    let scaled = (clamped * S::from_f64_lossy(32768.0)).round();
    scaled.to_f64_lossy() as i16
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedWav {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn unsupported(path: &Path, reason: impl Into<String>) -> Error {
    Error::UnsupportedWav {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_u16(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Read a mono 16-bit PCM RIFF/WAVE file.
pub fn read_wav<S: Sample>(path: impl AsRef<Path>) -> Result<Signal<S>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed(path, "missing RIFF/WAVE header"));
    }

    let mut sample_rate = None;
    let mut data: Option<&[u8]> = None;
    let mut at = 12usize;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = read_u32(&bytes, at + 4) as usize;
        let body_start = at + 8;
        if body_start + size > bytes.len() {
            return Err(malformed(path, "chunk extends past end of file"));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(malformed(path, "fmt chunk too small"));
                }
                let format = read_u16(body, 0);
                if format != 1 {
                    return Err(unsupported(path, format!("encoding {format} (PCM only)")));
                }
                let channels = read_u16(body, 2);
                if channels != 1 {
                    return Err(unsupported(
                        path,
                        format!("{channels} channels (mono only)"),
                    ));
                }
                let bits = read_u16(body, 14);
                if bits != 16 {
                    return Err(unsupported(path, format!("{bits}-bit depth (16-bit only)")));
                }
                sample_rate = Some(read_u32(body, 4));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned; odd sizes carry a pad byte.
        at = body_start + size + (size & 1);
    }

    let sample_rate = sample_rate.ok_or_else(|| malformed(path, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| malformed(path, "missing data chunk"))?;
    if data.len() % 2 != 0 {
        return Err(malformed(path, "data chunk has odd byte length"));
    }
    let samples = data
        .chunks_exact(2)
        .map(|b| dequantize(i16::from_le_bytes([b[0], b[1]])))
        .collect();
    Ok(Signal::new(samples, sample_rate))
}

/// Write a signal as mono 16-bit PCM with the canonical 44-byte header.
pub fn write_wav<S: Sample>(signal: &Signal<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let data_len = (signal.len() * 2) as u32;
    let sample_rate = signal.sample_rate;
    let byte_rate = sample_rate * 2;

    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &v in &signal.samples {
        out.extend_from_slice(&quantize(v).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Synthetic input kinds for running the pipeline without external audio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Seeded uniform noise in [-0.5, 0.5).
    Noise,
    /// Fixed tone with a 32-sample period, peak 0.5.
    Tone,
    /// Linear up-chirp, peak 0.45.
    Chirp,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthKind::Noise => write!(f, "noise"),
            SynthKind::Tone => write!(f, "tone"),
            SynthKind::Chirp => write!(f, "chirp"),
        }
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(SynthKind::Noise),
            "tone" => Ok(SynthKind::Tone),
            "chirp" => Ok(SynthKind::Chirp),
            other => Err(Error::InvalidParams(format!(
                "unknown synth kind {other:?} (expected noise, tone, or chirp)"
            ))),
        }
    }
}

/// Deterministic synthetic audio; amplitudes stay at or below 0.5 to leave
/// headroom for embedding.
pub fn synth_signal<S: Sample>(
    kind: SynthKind,
    length: usize,
    sample_rate: u32,
    seed: u64,
) -> Signal<S> {
    let samples: Vec<S> = match kind {
        SynthKind::Noise => {
            let mut rng = seeds::rng(seed);
            (0..length)
                .map(|_| {
                    let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                    S::from_f64_lossy(unit - 0.5)
                })
                .collect()
        }
        SynthKind::Tone => (0..length)
            .map(|i| {
                let phase = 2.0 * std::f64::consts::PI * (i % 32) as f64 / 32.0;
                S::from_f64_lossy(0.5 * phase.sin())
            })
            .collect(),
        SynthKind::Chirp => {
            let total = length.max(1) as f64;
            let top = sample_rate as f64 / 4.0;
            (0..length)
                .map(|i| {
                    let t = i as f64 / sample_rate as f64;
                    let phase = std::f64::consts::PI * top * t * t * (i as f64 / total);
                    S::from_f64_lossy(0.45 * phase.sin())
                })
                .collect()
        }
    };
    Signal::new(samples, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantization_pins() {
        // round(0.525 * 32768) = round(17203.2) = 17203
        assert_eq!(quantize(0.525f64), 17203);
        assert_eq!(quantize(1.5f64), 32767);
        assert_eq!(quantize(-2.0f64), -32768);
        assert_eq!(quantize(0.0f64), 0);
        assert_eq!(quantize(f64::NAN), 0);
        // Half away from zero.
        assert_eq!(quantize(1.5f64 / 32768.0), 2);
        assert_eq!(quantize(-1.5f64 / 32768.0), -2);
    }

    #[test]
    fn dequantization_pins() {
        assert_eq!(dequantize::<f64>(16384), 0.5);
        assert_eq!(dequantize::<f64>(-32768), -1.0);
        assert_eq!(dequantize::<f64>(0), 0.0);
    }

    #[test]
    fn file_round_trip_is_exact_for_integer_signals() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let samples: Vec<f64> = (-4i16..4).map(|v| dequantize(v * 1000)).collect();
        let signal = Signal::new(samples.clone(), 44100);
        write_wav(&signal, &path).unwrap();
        let back = read_wav::<f64>(&path).unwrap();
        assert_eq!(back.samples, samples);
        assert_eq!(back.sample_rate, 44100);
    }

    #[test]
    fn written_header_is_canonical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.wav");
        write_wav(&Signal::new(vec![0.0f64; 2], 44100), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 48);
        let mut expected = Vec::new();
        expected.extend_from_slice(b"RIFF");
        expected.extend_from_slice(&40u32.to_le_bytes());
        expected.extend_from_slice(b"WAVE");
        expected.extend_from_slice(b"fmt ");
        expected.extend_from_slice(&16u32.to_le_bytes());
        expected.extend_from_slice(&[1, 0, 1, 0]);
        expected.extend_from_slice(&44100u32.to_le_bytes());
        expected.extend_from_slice(&88200u32.to_le_bytes());
        expected.extend_from_slice(&[2, 0, 16, 0]);
        expected.extend_from_slice(b"data");
        expected.extend_from_slice(&4u32.to_le_bytes());
        assert_eq!(&bytes[..44], &expected[..]);
    }

    #[test]
    fn reader_distinguishes_failure_modes() {
        let dir = tempfile::tempdir().unwrap();

        assert!(matches!(
            read_wav::<f64>(dir.path().join("missing.wav")),
            Err(Error::Io { .. })
        ));

        let garbage = dir.path().join("garbage.wav");
        std::fs::write(&garbage, b"not a wav file").unwrap();
        assert!(matches!(
            read_wav::<f64>(&garbage),
            Err(Error::MalformedWav { .. })
        ));

        // Valid RIFF shell with a stereo fmt chunk.
        let stereo = dir.path().join("stereo.wav");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&36u32.to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes()); // 2 channels
        bytes.extend_from_slice(&44100u32.to_le_bytes());
        bytes.extend_from_slice(&176400u32.to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&stereo, &bytes).unwrap();
        assert!(matches!(
            read_wav::<f64>(&stereo),
            Err(Error::UnsupportedWav { .. })
        ));
    }

    #[test]
    fn reader_skips_extra_chunks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("list.wav");
        let mut bytes = Vec::new();
        let data: [u8; 4] = [0, 64, 0, 192]; // 16384, -16384
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(4 + 8 + 16 + 8 + 5 + 1 + 8 + 4u32).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&16000u32.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        // LIST chunk with odd length plus pad byte.
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&5u32.to_le_bytes());
        bytes.extend_from_slice(b"INFOX");
        bytes.push(0);
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&data);
        std::fs::write(&path, &bytes).unwrap();
        let signal = read_wav::<f64>(&path).unwrap();
        assert_eq!(signal.samples, vec![0.5, -0.5]);
        assert_eq!(signal.sample_rate, 8000);
    }

    #[test]
    fn synth_is_deterministic_and_bounded() {
        let a = synth_signal::<f64>(SynthKind::Noise, 4096, 44100, 1);
        let b = synth_signal::<f64>(SynthKind::Noise, 4096, 44100, 1);
        assert_eq!(a, b);
        let c = synth_signal::<f64>(SynthKind::Noise, 4096, 44100, 2);
        assert_ne!(a, c);
        assert!(a.samples.iter().all(|&v| (-0.5..0.5).contains(&v)));

        for kind in [SynthKind::Tone, SynthKind::Chirp] {
            let s = synth_signal::<f64>(kind, 2048, 44100, 0);
            assert!(s.samples.iter().all(|&v| v.abs() <= 0.5));
        }
    }

    proptest! {
        #[test]
        fn quantization_round_trip_stays_within_one_step(v in -1.5f64..1.5) {
            let back: f64 = dequantize(quantize(v));
            let clamped = v.clamp(-1.0, 32767.0 / 32768.0);
            prop_assert!((back - clamped).abs() <= 1.0 / 32768.0);
        }
    }
}
