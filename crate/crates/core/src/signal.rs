//! Sampled mono audio in the real-valued domain.

use crate::error::{Error, Result};
use crate::sample::Sample;

/// A mono audio signal. Samples are nominally in [-1, 1] and must be finite;
/// embedding may push individual samples past the nominal range, which is
/// resolved by clamping at 16-bit write time, not here.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal<S> {
    pub samples: Vec<S>,
    pub sample_rate: u32,
}

impl<S: Sample> Signal<S> {
    pub fn new(samples: Vec<S>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Signal-to-noise ratio of `processed` against `original`, in dB.
///
/// The "noise" is the per-sample difference, so for a watermarked copy this
/// measures embedding distortion.
pub fn snr_db<S: Sample>(original: &Signal<S>, processed: &Signal<S>) -> Result<f64> {
    if original.len() != processed.len() {
        return Err(Error::LengthMismatch {
            left: original.len(),
            right: processed.len(),
        });
    }
    let mut signal_energy = S::zero();
    let mut noise_energy = S::zero();
    for (&x, &y) in original.samples.iter().zip(&processed.samples) {
        signal_energy = signal_energy + x * x;
        let d = y - x;
        noise_energy = noise_energy + d * d;
    }
    if signal_energy == S::zero() {
        return Err(Error::ZeroNorm);
    }
    if noise_energy == S::zero() {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal_energy.to_f64_lossy() / noise_energy.to_f64_lossy()).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_of_identical_signals_is_infinite() {
        let x = Signal::new(vec![0.1f64, -0.2, 0.3], 44100);
        assert_eq!(snr_db(&x, &x).unwrap(), f64::INFINITY);
    }

    #[test]
    fn snr_rejects_mismatched_lengths() {
        let a = Signal::new(vec![0.1f64], 44100);
        let b = Signal::new(vec![0.1f64, 0.2], 44100);
        assert!(matches!(snr_db(&a, &b), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn snr_rejects_silent_reference() {
        let a = Signal::new(vec![0.0f64; 4], 44100);
        let b = Signal::new(vec![0.1f64; 4], 44100);
        assert!(matches!(snr_db(&a, &b), Err(Error::ZeroNorm)));
    }
}
