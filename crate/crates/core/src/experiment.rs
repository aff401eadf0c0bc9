//! Deterministic experiment harness: generate fingerprinted copies, attack
//! them, run both detection rules, and report correct-detection rates.
//!
//! Every per-copy draw (users, attack amount, offsets) comes from a stream
//! seeded by `(master_seed, copy_id)`, so trials are order-independent and
//! the same copies are attacked identically under every scheme. Reports are
//! byte-stable for a fixed config.

use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::assignment::SchemeParams;
use crate::attacks::{apply_attack, collude_average, AttackKind, AttackPosition, AttackSpec};
use crate::audio_io::{read_wav, synth_signal, SynthKind};
use crate::codebook::{generate_codebook, Codebook};
use crate::detect::{detect, ThresholdPolicy};
use crate::embed::{embed_stream, EmbedSpec, Scheme};
use crate::error::{Error, Result};
use crate::seeds;
use crate::signal::Signal;

pub const ROWS_HEADER: &str = "copy_id,scheme,users,attack_kind,attack_amount,traced_users,correct";

/// What counts as a correctly detected copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Traced users must equal the embedded users exactly.
    ExactSet,
    /// At least one embedded user is traced.
    AnyColluder,
}

/// How users are assigned to copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserSelection {
    /// Uniform seeded draw per copy.
    Random,
    /// Deterministic sweep over the user range.
    Cycle,
}

/// Input audio: a WAV file or a synthetic spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputConfig {
    Wav {
        wav: PathBuf,
    },
    Synth {
        #[serde(default = "default_synth_kind")]
        kind: SynthKind,
        #[serde(default = "default_input_length")]
        length: usize,
        #[serde(default = "default_sample_rate")]
        sample_rate: u32,
        #[serde(default = "default_input_seed")]
        seed: u64,
    },
}

fn default_synth_kind() -> SynthKind {
    SynthKind::Noise
}

fn default_input_length() -> usize {
    // 256 frames of 1024 samples: long enough that averaged 2-colluder
    // peaks clear the default detection floor.
    262144
}

fn default_sample_rate() -> u32 {
    44100
}

fn default_input_seed() -> u64 {
    1
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig::Synth {
            kind: default_synth_kind(),
            length: default_input_length(),
            sample_rate: default_sample_rate(),
            seed: default_input_seed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionMode {
    /// Attack the head of the stream (one global delay change).
    Head,
    /// Attack at a seeded random offset.
    Random,
}

/// Desynchronization attack mix applied to the copies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackMixConfig {
    pub enabled: bool,
    pub crop_fraction: f64,
    pub shift_fraction: f64,
    pub amount_min: usize,
    pub amount_max: usize,
    pub position: PositionMode,
}

impl Default for AttackMixConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            crop_fraction: 0.5,
            shift_fraction: 0.5,
            amount_min: 1,
            amount_max: 512,
            position: PositionMode::Head,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollusionMode {
    None,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollusionConfig {
    pub mode: CollusionMode,
    pub colluders: usize,
}

impl Default for CollusionConfig {
    fn default() -> Self {
        Self {
            mode: CollusionMode::None,
            colluders: 2,
        }
    }
}

/// Full experiment scenario. The default reproduces the headline
/// desynchronization comparison: 100 copies, half head-cropped and half
/// head-shifted with amounts in [1, 512], no collusion, both schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub copies: usize,
    pub master_seed: u64,
    pub codebook_seed: u64,
    pub codebook_epsilon: f64,
    pub schemes: Vec<Scheme>,
    pub metric: Metric,
    pub user_selection: UserSelection,
    pub params: SchemeParams,
    pub input: InputConfig,
    pub attack: AttackMixConfig,
    pub collusion: CollusionConfig,
    pub policy: ThresholdPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            copies: 100,
            master_seed: 7,
            codebook_seed: 42,
            codebook_epsilon: 0.2,
            schemes: vec![Scheme::Original, Scheme::Improved],
            metric: Metric::ExactSet,
            user_selection: UserSelection::Random,
            params: SchemeParams::default(),
            input: InputConfig::default(),
            attack: AttackMixConfig::default(),
            collusion: CollusionConfig::default(),
            policy: ThresholdPolicy::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.copies == 0 {
            return Err(Error::InvalidConfig("copies must be >= 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("at least one scheme required".into()));
        }
        self.params.validate()?;
        if !(self.codebook_epsilon > 0.0 && self.codebook_epsilon <= 1.0) {
            return Err(Error::InvalidConfig(
                "codebook epsilon must be in (0, 1]".into(),
            ));
        }
        let a = &self.attack;
        if a.enabled {
            if a.crop_fraction < 0.0
                || a.shift_fraction < 0.0
                || (a.crop_fraction + a.shift_fraction - 1.0).abs() > 1e-9
            {
                return Err(Error::InvalidConfig(
                    "attack fractions must be non-negative and sum to 1".into(),
                ));
            }
            if a.amount_min == 0 || a.amount_min > a.amount_max {
                return Err(Error::InvalidConfig(
                    "attack amounts must satisfy 1 <= min <= max".into(),
                ));
            }
        }
        if self.collusion.mode == CollusionMode::Average {
            if self.collusion.colluders < 2 {
                return Err(Error::InvalidConfig("colluders must be >= 2".into()));
            }
            if self.collusion.colluders > self.params.total_users {
                return Err(Error::InvalidConfig("more colluders than users".into()));
            }
        }
        if let InputConfig::Synth { length, .. } = self.input {
            if length < self.params.frame_len {
                return Err(Error::InvalidConfig("input shorter than one frame".into()));
            }
        }
        Ok(())
    }

    fn colluder_count(&self) -> usize {
        match self.collusion.mode {
            CollusionMode::None => 1,
            CollusionMode::Average => self.collusion.colluders,
        }
    }

    fn crop_copy_count(&self) -> usize {
        (self.copies as f64 * self.attack.crop_fraction).round() as usize
    }
}

/// Load an experiment config from a TOML file; unset keys take defaults.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Build the input signal a config describes.
pub fn load_input(config: &ExperimentConfig) -> Result<Signal<f64>> {
    match &config.input {
        InputConfig::Wav { wav } => read_wav(wav),
        InputConfig::Synth {
            kind,
            length,
            sample_rate,
            seed,
        } => Ok(synth_signal(*kind, *length, *sample_rate, *seed)),
    }
}

/// Generate the codebook a config describes.
pub fn build_codebook(config: &ExperimentConfig) -> Result<Codebook<f64>> {
    generate_codebook(
        config.params.group_count,
        config.params.frame_len,
        config.codebook_seed,
        config.codebook_epsilon,
    )
}

/// Outcome of one (copy, scheme) trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopyRecord {
    pub copy_id: usize,
    pub scheme: Scheme,
    pub users: Vec<usize>,
    pub attack_kind: Option<AttackKind>,
    pub attack_amount: Option<usize>,
    pub traced_users: Vec<usize>,
    /// Correct under the configured metric.
    pub correct: bool,
    pub correct_exact: bool,
    pub correct_any: bool,
}

/// Aggregate rates for one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub copies: usize,
    pub correct_copies: usize,
    /// Correct copies / total copies under the configured metric.
    pub rate: f64,
    pub exact_set_rate: f64,
    pub any_colluder_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub codebook_digest: String,
    pub summaries: Vec<SchemeSummary>,
    pub records: Vec<CopyRecord>,
}

fn pick_users(
    rng: &mut ChaCha8Rng,
    config: &ExperimentConfig,
    copy_id: usize,
    count: usize,
) -> Vec<usize> {
    let total = config.params.total_users;
    let mut users: Vec<usize> = match config.user_selection {
        UserSelection::Random => {
            let mut picked = Vec::with_capacity(count);
            while picked.len() < count {
                let user = (rng.next_u64() % total as u64) as usize;
                if !picked.contains(&user) {
                    picked.push(user);
                }
            }
            picked
        }
        UserSelection::Cycle => (0..count).map(|i| (copy_id * count + i) % total).collect(),
    };
    users.sort_unstable();
    users
}

/// Run one (copy, scheme) trial. All randomness derives from
/// `(config.master_seed, copy_id)`, never from the scheme, so different
/// schemes see identical users and attacks.
pub fn run_trial(
    config: &ExperimentConfig,
    codebook: &Codebook<f64>,
    base: &Signal<f64>,
    copy_id: usize,
    scheme: Scheme,
) -> Result<CopyRecord> {
    let mut rng = seeds::trial_rng(config.master_seed, copy_id as u64);
    let users = pick_users(&mut rng, config, copy_id, config.colluder_count());

    let mut marked = Vec::with_capacity(users.len());
    for &user in &users {
        let spec = EmbedSpec {
            user,
            scheme,
            params: config.params,
            codebook,
        };
        marked.push(embed_stream(base, &spec)?);
    }
    let merged = if marked.len() == 1 {
        marked.pop().expect("one embedded copy")
    } else {
        collude_average(&marked)?
    };

    let (attack_kind, attack_amount, attacked) = if config.attack.enabled {
        let kind = if copy_id < config.crop_copy_count() {
            AttackKind::Crop
        } else {
            AttackKind::Shift
        };
        let span = (config.attack.amount_max - config.attack.amount_min + 1) as u64;
        let amount = config.attack.amount_min + (rng.next_u64() % span) as usize;
        let position = match config.attack.position {
            PositionMode::Head => AttackPosition::Head,
            PositionMode::Random => {
                let bound = match kind {
                    AttackKind::Crop => merged.len().saturating_sub(amount),
                    AttackKind::Shift => merged.len(),
                };
                AttackPosition::AtOffset((rng.next_u64() % (bound as u64 + 1)) as usize)
            }
        };
        let spec = AttackSpec {
            kind,
            amount,
            position,
        };
        (Some(kind), Some(amount), apply_attack(&merged, &spec)?)
    } else {
        (None, None, merged)
    };

    let report = detect(scheme, &attacked, codebook, &config.params, &config.policy)?;
    let correct_exact = report.traced_users == users;
    let correct_any = users.iter().any(|u| report.traced_users.contains(u));
    let correct = match config.metric {
        Metric::ExactSet => correct_exact,
        Metric::AnyColluder => correct_any,
    };

    Ok(CopyRecord {
        copy_id,
        scheme,
        users,
        attack_kind,
        attack_amount,
        traced_users: report.traced_users,
        correct,
        correct_exact,
        correct_any,
    })
}

/// Run every (copy, scheme) trial and aggregate the rates.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let codebook = build_codebook(config)?;
    let base = load_input(config)?;

    let mut records = Vec::with_capacity(config.copies * config.schemes.len());
    for copy_id in 0..config.copies {
        for &scheme in &config.schemes {
            records.push(run_trial(config, &codebook, &base, copy_id, scheme)?);
        }
    }

    let summaries = config
        .schemes
        .iter()
        .map(|&scheme| {
            let scheme_records: Vec<&CopyRecord> =
                records.iter().filter(|r| r.scheme == scheme).collect();
            let copies = scheme_records.len();
            let correct_copies = scheme_records.iter().filter(|r| r.correct).count();
            let exact = scheme_records.iter().filter(|r| r.correct_exact).count();
            let any = scheme_records.iter().filter(|r| r.correct_any).count();
            SchemeSummary {
                scheme,
                copies,
                correct_copies,
                rate: correct_copies as f64 / copies as f64,
                exact_set_rate: exact as f64 / copies as f64,
                any_colluder_rate: any as f64 / copies as f64,
            }
        })
        .collect();

    Ok(ExperimentReport {
        config: config.clone(),
        codebook_digest: codebook.digest(),
        summaries,
        records,
    })
}

impl ExperimentReport {
    pub fn summary_for(&self, scheme: Scheme) -> Option<&SchemeSummary> {
        self.summaries.iter().find(|s| s.scheme == scheme)
    }
}

fn join_users(users: &[usize]) -> String {
    users
        .iter()
        .map(|u| u.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Per-copy rows, comma-separated, one line per (copy, scheme).
pub fn rows_string(report: &ExperimentReport) -> String {
    let mut out = String::from(ROWS_HEADER);
    out.push('\n');
    for r in &report.records {
        let kind = match r.attack_kind {
            Some(k) => k.to_string(),
            None => "none".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.copy_id,
            r.scheme,
            join_users(&r.users),
            kind,
            r.attack_amount.unwrap_or(0),
            join_users(&r.traced_users),
            r.correct
        ));
    }
    out
}

/// Aggregate report as pretty JSON.
pub fn structured_string(report: &ExperimentReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Rows,
    Structured,
}

/// Write a report to a file in the requested format.
pub fn emit_report(
    report: &ExperimentReport,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Rows => rows_string(report),
        ReportFormat::Structured => structured_string(report)?,
    };
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
