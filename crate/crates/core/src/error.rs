//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },

    #[error("signal too short: need at least {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },

    #[error("zero-norm sequence: normalized correlation is undefined")]
    ZeroNorm,

    #[error("need at least {needed} signals, got {got}")]
    TooFewSignals { needed: usize, got: usize },

    #[error(
        "codebook infeasible: group {group} exhausted {attempts} candidates at epsilon {epsilon}"
    )]
    CodebookInfeasible {
        group: usize,
        attempts: usize,
        epsilon: f64,
    },

    #[error("sync code infeasible: exhausted {attempts} candidates at epsilon {epsilon}")]
    SyncInfeasible { attempts: usize, epsilon: f64 },

    #[error("user id {user} out of range for {total} users")]
    UserOutOfRange { user: usize, total: usize },

    #[error(
        "group {group} or delay index {index} out of range ({groups} groups x {per_group} users)"
    )]
    PartsOutOfRange {
        group: usize,
        index: usize,
        groups: usize,
        per_group: usize,
    },

    #[error("delay {delay} out of range for frame length {frame_len}")]
    DelayOutOfRange { delay: usize, frame_len: usize },

    #[error("attack block [{offset}, {offset}+{amount}) out of range for {len} samples")]
    AttackOutOfRange {
        offset: usize,
        amount: usize,
        len: usize,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("codebook does not match parameters: {0}")]
    CodebookMismatch(String),

    #[error("invalid codebook file: {0}")]
    InvalidCodebookFile(String),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: malformed WAV: {reason}")]
    MalformedWav { path: PathBuf, reason: String },

    #[error("{path}: unsupported WAV format: {reason}")]
    UnsupportedWav { path: PathBuf, reason: String },

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}
