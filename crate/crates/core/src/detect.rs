//! Fold-and-correlate detection and user tracing.
//!
//! The watermark repeats every frame while the audio content does not, so
//! summing all complete frames into one accumulator amplifies the codes
//! coherently against the content. Each code's normalized cyclic correlation
//! profile then peaks at its embedding delay. Peaks above an adaptive
//! threshold become hits; hits whose delay lands on the grid trace users.
//!
//! The improved rule first locates the sync code. Its displacement from the
//! known base delay measures the attack's global offset, which is subtracted
//! from every fingerprint delay before grid matching, undoing cropping and
//! time shifting in one step.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::assignment::{delay_to_index, SchemeParams};
use crate::codebook::Codebook;
use crate::corr::{cyclic_corr_raw, norm};
use crate::embed::Scheme;
use crate::error::{Error, Result};
use crate::sample::Sample;
use crate::signal::Signal;

/// Which code a correlation profile belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodeRef {
    Group(usize),
    Sync,
}

/// Normalized correlation at every cyclic lag for one code.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile<S> {
    pub code: CodeRef,
    pub values: Vec<S>,
}

/// Peak acceptance policy: a lag is a peak when its score reaches both
/// `kappa` times the median absolute profile value (scale-free part) and the
/// absolute floor. `tol` doubles as the peak exclusion radius and the grid
/// matching tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdPolicy {
    pub kappa: f64,
    pub floor_abs: f64,
    pub tol: usize,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self {
            kappa: 5.0,
            floor_abs: 0.2,
            tol: 2,
        }
    }
}

impl ThresholdPolicy {
    /// Effective threshold for one profile.
    pub fn threshold_for<S: Sample>(&self, values: &[S]) -> f64 {
        let mut magnitudes: Vec<f64> = values.iter().map(|v| v.to_f64_lossy().abs()).collect();
        magnitudes.sort_by(f64::total_cmp);
        let median = if magnitudes.is_empty() {
            0.0
        } else if magnitudes.len() % 2 == 1 {
            magnitudes[magnitudes.len() / 2]
        } else {
            let mid = magnitudes.len() / 2;
            (magnitudes[mid - 1] + magnitudes[mid]) / 2.0
        };
        (self.kappa * median).max(self.floor_abs)
    }
}

/// One accepted correlation peak and the user it traces to, if any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub group_id: usize,
    pub detected_delay: usize,
    /// Attack-offset-corrected delay; equals `detected_delay` under the
    /// original rule.
    pub corrected_delay: usize,
    pub score: f64,
    pub traced_user: Option<usize>,
}

/// Full detection outcome for one signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub scheme: Scheme,
    /// Detected sync delay (improved rule only).
    pub sync_detected_delay: Option<usize>,
    /// Set when the improved rule found no sync peak and fell back to a zero
    /// offset.
    pub sync_missing: bool,
    pub hits: Vec<Hit>,
    /// Sorted, deduplicated.
    pub traced_users: Vec<usize>,
}

impl TraceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Sum all complete frames into one length-n accumulator; a trailing partial
/// frame is ignored.
pub fn fold_frames<S: Sample>(signal: &Signal<S>, frame_len: usize) -> Result<Vec<S>> {
    if frame_len == 0 {
        return Err(Error::InvalidParams("frame length must be >= 1".into()));
    }
    if signal.len() < frame_len {
        return Err(Error::SignalTooShort {
            needed: frame_len,
            got: signal.len(),
        });
    }
    let mut acc = vec![S::zero(); frame_len];
    for frame in signal.samples.chunks_exact(frame_len) {
        for (a, &v) in acc.iter_mut().zip(frame) {
            *a = *a + v;
        }
    }
    Ok(acc)
}

/// Normalized cyclic correlation of the accumulator against a code at every
/// lag: `values[lag] = sum_p acc[p] * code[(p - lag) mod n] / (|acc| * |code|)`.
/// The peak lag equals the code's embedding delay.
pub fn correlate_all_lags<S: Sample>(accumulator: &[S], code: &[S]) -> Result<Vec<S>> {
    if accumulator.len() != code.len() {
        return Err(Error::LengthMismatch {
            left: accumulator.len(),
            right: code.len(),
        });
    }
    let na = norm(accumulator);
    let nc = norm(code);
    if na == S::zero() || nc == S::zero() {
        return Err(Error::ZeroNorm);
    }
    let scale = na * nc;
    Ok(cyclic_corr_raw(accumulator, code)
        .into_iter()
        .map(|v| v / scale)
        .collect())
}

fn cyclic_distance(a: usize, b: usize, n: usize) -> usize {
    let raw = a.abs_diff(b);
    raw.min(n - raw)
}

/// All lags whose score clears the policy threshold, greedily accepted in
/// descending score order with a cyclic exclusion window of `tol` samples
/// around each accepted peak. An empty result is a valid outcome.
pub fn find_peaks<S: Sample>(
    profile: &CorrelationProfile<S>,
    policy: &ThresholdPolicy,
) -> Vec<(usize, f64)> {
    let threshold = policy.threshold_for(&profile.values);
    let n = profile.values.len();
    let mut candidates: Vec<(usize, f64)> = profile
        .values
        .iter()
        .enumerate()
        .map(|(lag, v)| (lag, v.to_f64_lossy()))
        .filter(|&(_, score)| score >= threshold)
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for (lag, score) in candidates {
        if peaks
            .iter()
            .all(|&(kept, _)| cyclic_distance(lag, kept, n) > policy.tol)
        {
            peaks.push((lag, score));
        }
    }
    peaks
}

/// Remove a global attack offset from a detected delay:
/// `(detected - (sync_detected - sync_base)) mod n`.
pub fn correct_delay(
    detected_delay: usize,
    sync_detected_delay: usize,
    sync_base_delay: usize,
    frame_len: usize,
) -> usize {
    let n = frame_len;
    let offset = (sync_detected_delay + n - sync_base_delay) % n;
    (detected_delay + n - offset) % n
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

fn trace_codes<S: Sample>(
    accumulator: &[S],
    codebook: &Codebook<S>,
    params: &SchemeParams,
    policy: &ThresholdPolicy,
    attack_offset: usize,
) -> Result<(Vec<Hit>, Vec<usize>)> {
    let n = params.frame_len;
    let mut hits = Vec::new();
    let mut traced = BTreeSet::new();
    for code in &codebook.codes {
        let values = correlate_all_lags(accumulator, &code.samples)?;
        let profile = CorrelationProfile {
            code: CodeRef::Group(code.group_id),
            values,
        };
        for (lag, score) in find_peaks(&profile, policy) {
            let corrected = (lag + n - attack_offset) % n;
            let traced_user = delay_to_index(corrected, params, policy.tol)
                .map(|j| code.group_id * params.users_per_group + j);
            if let Some(user) = traced_user {
                traced.insert(user);
            }
            hits.push(Hit {
                group_id: code.group_id,
                detected_delay: lag,
                corrected_delay: corrected,
                score,
                traced_user,
            });
        }
    }
    Ok((hits, traced.into_iter().collect()))
}

/// Original rule: fold, correlate against every group code, map peak lags
/// straight onto the delay grid. Off-grid peaks stay in the report as hits
/// that trace nobody.
pub fn detect_original<S: Sample>(
    signal: &Signal<S>,
    codebook: &Codebook<S>,
    params: &SchemeParams,
    policy: &ThresholdPolicy,
) -> Result<TraceReport> {
    params.validate()?;
    check_codebook(codebook, params)?;
    let accumulator = fold_frames(signal, params.frame_len)?;
    let (hits, traced_users) = trace_codes(&accumulator, codebook, params, policy, 0)?;
    Ok(TraceReport {
        scheme: Scheme::Original,
        sync_detected_delay: None,
        sync_missing: false,
        hits,
        traced_users,
    })
}

/// Improved rule: locate the sync peak, subtract its displacement from every
/// fingerprint delay, then trace. Falls back to a zero offset (flagged
/// `sync_missing`) when no sync peak clears the threshold.
pub fn detect_improved<S: Sample>(
    signal: &Signal<S>,
    codebook: &Codebook<S>,
    params: &SchemeParams,
    policy: &ThresholdPolicy,
) -> Result<TraceReport> {
    params.validate()?;
    check_codebook(codebook, params)?;
    let accumulator = fold_frames(signal, params.frame_len)?;

    let sync_values = correlate_all_lags(&accumulator, &codebook.sync.samples)?;
    let sync_threshold = policy.threshold_for(&sync_values);
    let mut best: Option<(usize, f64)> = None;
    for (lag, v) in sync_values.iter().enumerate() {
        let score = v.to_f64_lossy();
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((lag, score));
        }
    }
    let sync_peak = best.filter(|&(_, score)| score >= sync_threshold);

    let (sync_detected_delay, sync_missing, attack_offset) = match sync_peak {
        Some((lag, _)) => {
            let n = params.frame_len;
            let offset = (lag + n - codebook.sync.base_delay) % n;
            (Some(lag), false, offset)
        }
        None => (None, true, 0),
    };

    let (hits, traced_users) = trace_codes(&accumulator, codebook, params, policy, attack_offset)?;
    Ok(TraceReport {
        scheme: Scheme::Improved,
        sync_detected_delay,
        sync_missing,
        hits,
        traced_users,
    })
}

/// Run the detector matching a scheme.
pub fn detect<S: Sample>(
    scheme: Scheme,
    signal: &Signal<S>,
    codebook: &Codebook<S>,
    params: &SchemeParams,
    policy: &ThresholdPolicy,
) -> Result<TraceReport> {
    match scheme {
        Scheme::Original => detect_original(signal, codebook, params, policy),
        Scheme::Improved => detect_improved(signal, codebook, params, policy),
    }
}
