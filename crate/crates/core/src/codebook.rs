//! Pseudo-noise fingerprint codes and the shared synchronization code.
//!
//! Every group gets one bipolar (+1/-1) code of the frame length; all codes,
//! and the sync code against each of them, are kept quasi-orthogonal at
//! *every* cyclic lag, because delayed embedding turns any lag into a
//! potential collision. Generation is seeded rejection sampling: draw a
//! bipolar candidate, keep it only if its worst-lag normalized correlation
//! against everything already accepted stays within `epsilon_orth`.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corr::{cyclic_corr_raw, norm};
use crate::error::{Error, Result};
use crate::sample::Sample;
use crate::seeds;

/// Candidates tried per code before generation gives up.
pub const CANDIDATE_BUDGET: usize = 1000;

const CODEBOOK_FILE_VERSION: u32 = 1;

/// One group's fingerprint code: a length-n bipolar sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintCode<S> {
    pub group_id: usize,
    pub samples: Vec<S>,
    /// Seed of the stream that produced this code.
    pub seed: u64,
}

/// The synchronization code shared by every user, embedded at a fixed
/// `base_delay` so that its detected displacement measures an attack's
/// global offset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncCode<S> {
    pub samples: Vec<S>,
    pub base_delay: usize,
    pub seed: u64,
}

/// The full code set for one deployment: group codes plus the sync code.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<S> {
    pub codes: Vec<FingerprintCode<S>>,
    pub sync: SyncCode<S>,
    pub code_len: usize,
    pub epsilon_orth: f64,
}

/// Max over all cyclic lags of the normalized cross-correlation magnitude,
/// `max_d |sum_k a[k] * b[(k+d) mod n]| / (|a| * |b|)`, in [0, 1].
pub fn max_cyclic_crosscorr<S: Sample>(a: &[S], b: &[S]) -> Result<S> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::SignalTooShort { needed: 1, got: 0 });
    }
    let na = norm(a);
    let nb = norm(b);
    if na == S::zero() || nb == S::zero() {
        return Err(Error::ZeroNorm);
    }
    let raw = cyclic_corr_raw(a, b);
    let mut best = S::zero();
    for v in raw {
        let mag = v.abs();
        if mag > best {
            best = mag;
        }
    }
    Ok(best / (na * nb))
}

fn draw_bipolar<S: Sample>(rng: &mut ChaCha8Rng, len: usize) -> Vec<S> {
    (0..len)
        .map(|_| {
            if rng.next_u32() & 1 == 1 {
                S::one()
            } else {
                -S::one()
            }
        })
        .collect()
}

fn orthogonal_to_all<S: Sample>(
    candidate: &[S],
    accepted: &[FingerprintCode<S>],
    epsilon_orth: f64,
) -> Result<bool> {
    for code in accepted {
        let score = max_cyclic_crosscorr(candidate, &code.samples)?;
        if score.to_f64_lossy() > epsilon_orth {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Generate `group_count` mutually quasi-orthogonal codes plus a sync code.
///
/// Deterministic for a fixed `(group_count, code_len, seed, epsilon_orth)`:
/// every code draws from its own sub-seeded stream. Fails with
/// [`Error::CodebookInfeasible`] if any code burns through the candidate
/// budget, which happens only when `epsilon_orth` is too tight for the
/// requested size.
pub fn generate_codebook<S: Sample>(
    group_count: usize,
    code_len: usize,
    seed: u64,
    epsilon_orth: f64,
) -> Result<Codebook<S>> {
    if group_count < 1 {
        return Err(Error::InvalidParams("group count must be >= 1".into()));
    }
    if code_len < 2 {
        return Err(Error::InvalidParams("code length must be >= 2".into()));
    }
    if !(epsilon_orth > 0.0 && epsilon_orth <= 1.0) {
        return Err(Error::InvalidParams(
            "epsilon_orth must be in (0, 1]".into(),
        ));
    }

    let mut codes: Vec<FingerprintCode<S>> = Vec::with_capacity(group_count);
    for group_id in 0..group_count {
        let code_seed = seeds::derive(seed, group_id as u64);
        let mut rng = seeds::rng(code_seed);
        let mut found = None;
        for _ in 0..CANDIDATE_BUDGET {
            let candidate = draw_bipolar::<S>(&mut rng, code_len);
            if orthogonal_to_all(&candidate, &codes, epsilon_orth)? {
                found = Some(candidate);
                break;
            }
        }
        let samples = found.ok_or(Error::CodebookInfeasible {
            group: group_id,
            attempts: CANDIDATE_BUDGET,
            epsilon: epsilon_orth,
        })?;
        codes.push(FingerprintCode {
            group_id,
            samples,
            seed: code_seed,
        });
    }

    let sync_seed = seeds::derive(seed, u64::MAX);
    let mut delay_rng = seeds::rng(seeds::derive(seed, u64::MAX - 1));
    let sync = generate_sync_code(&codes, code_len, sync_seed, epsilon_orth, &mut delay_rng)?;

    Ok(Codebook {
        codes,
        sync,
        code_len,
        epsilon_orth,
    })
}

/// Generate a sync code quasi-orthogonal to every given fingerprint code.
///
/// The base delay is drawn uniformly from `[0, code_len)` out of `delay_rng`,
/// independent of how many candidates the samples take.
pub fn generate_sync_code<S: Sample>(
    codes: &[FingerprintCode<S>],
    code_len: usize,
    seed: u64,
    epsilon_orth: f64,
    delay_rng: &mut dyn RngCore,
) -> Result<SyncCode<S>> {
    for code in codes {
        if code.samples.len() != code_len {
            return Err(Error::LengthMismatch {
                left: code.samples.len(),
                right: code_len,
            });
        }
    }
    // code_len is typically a power of two, making the modulo draw unbiased.
    let base_delay = (delay_rng.next_u64() % code_len as u64) as usize;

    let mut rng = seeds::rng(seed);
    for _ in 0..CANDIDATE_BUDGET {
        let candidate = draw_bipolar::<S>(&mut rng, code_len);
        if orthogonal_to_all(&candidate, codes, epsilon_orth)? {
            return Ok(SyncCode {
                samples: candidate,
                base_delay,
                seed,
            });
        }
    }
    Err(Error::SyncInfeasible {
        attempts: CANDIDATE_BUDGET,
        epsilon: epsilon_orth,
    })
}

#[derive(Serialize, Deserialize)]
struct CodebookFile {
    version: u32,
    code_len: usize,
    epsilon_orth: f64,
    codes: Vec<CodeEntry>,
    sync: SyncEntry,
}

#[derive(Serialize, Deserialize)]
struct CodeEntry {
    group_id: usize,
    seed: u64,
    signs: String,
}

#[derive(Serialize, Deserialize)]
struct SyncEntry {
    seed: u64,
    base_delay: usize,
    signs: String,
}

fn signs_string<S: Sample>(samples: &[S]) -> String {
    samples
        .iter()
        .map(|&v| if v > S::zero() { '+' } else { '-' })
        .collect()
}

fn samples_from_signs<S: Sample>(signs: &str, code_len: usize) -> Result<Vec<S>> {
    if signs.len() != code_len {
        return Err(Error::InvalidCodebookFile(format!(
            "sign string has {} entries, expected {}",
            signs.len(),
            code_len
        )));
    }
    signs
        .chars()
        .map(|c| match c {
            '+' => Ok(S::one()),
            '-' => Ok(-S::one()),
            other => Err(Error::InvalidCodebookFile(format!(
                "invalid sign character {other:?}"
            ))),
        })
        .collect()
}

impl<S: Sample> Codebook<S> {
    pub fn group_count(&self) -> usize {
        self.codes.len()
    }

    fn to_file_form(&self) -> CodebookFile {
        CodebookFile {
            version: CODEBOOK_FILE_VERSION,
            code_len: self.code_len,
            epsilon_orth: self.epsilon_orth,
            codes: self
                .codes
                .iter()
                .map(|c| CodeEntry {
                    group_id: c.group_id,
                    seed: c.seed,
                    signs: signs_string(&c.samples),
                })
                .collect(),
            sync: SyncEntry {
                seed: self.sync.seed,
                base_delay: self.sync.base_delay,
                signs: signs_string(&self.sync.samples),
            },
        }
    }

    fn from_file_form(file: CodebookFile) -> Result<Self> {
        if file.version != CODEBOOK_FILE_VERSION {
            return Err(Error::InvalidCodebookFile(format!(
                "unsupported version {}",
                file.version
            )));
        }
        if file.sync.base_delay >= file.code_len {
            return Err(Error::InvalidCodebookFile(format!(
                "sync base delay {} exceeds code length {}",
                file.sync.base_delay, file.code_len
            )));
        }
        let mut codes = Vec::with_capacity(file.codes.len());
        for (i, entry) in file.codes.iter().enumerate() {
            if entry.group_id != i {
                return Err(Error::InvalidCodebookFile(format!(
                    "expected group id {i}, found {}",
                    entry.group_id
                )));
            }
            codes.push(FingerprintCode {
                group_id: entry.group_id,
                samples: samples_from_signs(&entry.signs, file.code_len)?,
                seed: entry.seed,
            });
        }
        if codes.is_empty() {
            return Err(Error::InvalidCodebookFile("no codes".into()));
        }
        Ok(Codebook {
            sync: SyncCode {
                samples: samples_from_signs(&file.sync.signs, file.code_len)?,
                base_delay: file.sync.base_delay,
                seed: file.sync.seed,
            },
            codes,
            code_len: file.code_len,
            epsilon_orth: file.epsilon_orth,
        })
    }

    /// Write the codebook as versioned JSON; signs round-trip losslessly.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(&self.to_file_form())?;
        fs::write(path, json + "\n").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: CodebookFile =
            serde_json::from_str(&text).map_err(|e| Error::InvalidCodebookFile(e.to_string()))?;
        Self::from_file_form(file)
    }

    /// SHA-256 over the serialized form; identifies a codebook in reports.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(&self.to_file_form()).expect("codebook serializes");
        let hash = Sha256::digest(json.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}
