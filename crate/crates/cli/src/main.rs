//! Command-line front end: codebook generation, embedding, attacks,
//! detection, and experiment runs over mono 16-bit WAV files.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use delaymark::assignment::SchemeParams;
use delaymark::attacks::{apply_attack, AttackKind, AttackPosition, AttackSpec};
use delaymark::audio_io::{read_wav, synth_signal, write_wav, SynthKind};
use delaymark::codebook::{generate_codebook, Codebook};
use delaymark::detect::{detect, ThresholdPolicy};
use delaymark::embed::{embed_stream, EmbedSpec, Scheme};
use delaymark::error::Error;
use delaymark::experiment::{
    emit_report, load_config, run_experiment, ExperimentConfig, ReportFormat,
};
use delaymark::signal::snr_db;
use delaymark::Signal64;

#[derive(Parser)]
#[command(
    name = "delaymark",
    version,
    about = "Delay-based audio fingerprinting: embed, attack, detect, experiment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Codebook management.
    Codebook {
        #[command(subcommand)]
        command: CodebookCommand,
    },
    /// Embed a user's fingerprint into a WAV file.
    Embed(EmbedArgs),
    /// Apply a desynchronization attack to a WAV file.
    Attack(AttackArgs),
    /// Detect fingerprints in a WAV file and trace users.
    Detect(DetectArgs),
    /// Experiment harness.
    Experiment {
        #[command(subcommand)]
        command: ExperimentCommand,
    },
    /// Generate a synthetic test WAV.
    Synth(SynthArgs),
}

#[derive(Subcommand)]
enum CodebookCommand {
    /// Generate a codebook and write it to a JSON file.
    Gen {
        /// Number of groups (one code per group).
        #[arg(long, default_value_t = 16)]
        groups: usize,
        /// Code length in samples; must match the embedding frame length.
        #[arg(long, default_value_t = 1024)]
        code_len: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Orthogonality bound on the worst-lag cross-correlation.
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        /// Output path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SchemeParamArgs {
    /// Users per group (delays per code).
    #[arg(long, default_value_t = 4)]
    users_per_group: usize,
    /// Delay grid spacing in samples.
    #[arg(long, default_value_t = 20)]
    delay_step: usize,
    /// Embedding strength.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

impl SchemeParamArgs {
    fn params(&self, codebook: &Codebook<f64>) -> Result<SchemeParams> {
        Ok(SchemeParams::new(
            codebook.group_count(),
            self.users_per_group,
            codebook.code_len,
            self.delay_step,
            self.alpha,
        )?)
    }
}

#[derive(Args)]
struct EmbedArgs {
    /// Codebook JSON file.
    #[arg(long)]
    codebook: PathBuf,
    /// User id to fingerprint the copy for.
    #[arg(long)]
    user: usize,
    /// Embedding scheme: original or improved.
    #[arg(long, default_value = "improved")]
    scheme: String,
    #[command(flatten)]
    params: SchemeParamArgs,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args)]
struct AttackArgs {
    /// Attack kind: crop or shift.
    #[arg(long)]
    kind: String,
    /// Attack magnitude in samples.
    #[arg(long)]
    amount: usize,
    /// Sample offset of the attack; 0 (the head) by default.
    #[arg(long, default_value_t = 0)]
    at: usize,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    /// Codebook JSON file.
    #[arg(long)]
    codebook: PathBuf,
    /// Detection scheme: original or improved.
    #[arg(long, default_value = "improved")]
    scheme: String,
    #[command(flatten)]
    params: SchemeParamArgs,
    /// Peak threshold floor.
    #[arg(long, default_value_t = 0.2)]
    floor: f64,
    /// Peak threshold as a multiple of the median profile magnitude.
    #[arg(long, default_value_t = 5.0)]
    kappa: f64,
    /// Grid matching tolerance and peak exclusion radius, in samples.
    #[arg(long, default_value_t = 2)]
    tol: usize,
    /// Write the full trace report as JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
    input: PathBuf,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Run an experiment and write per-copy rows plus an aggregate report.
    Run {
        /// TOML config; defaults reproduce the headline desync comparison.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the number of copies.
        #[arg(long)]
        copies: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        master_seed: Option<u64>,
        /// Per-copy rows output (CSV).
        #[arg(long)]
        rows: Option<PathBuf>,
        /// Aggregate report output (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// noise, tone, or chirp.
    #[arg(long, default_value = "noise")]
    kind: String,
    /// Length in samples.
    #[arg(long, default_value_t = 262144)]
    length: usize,
    #[arg(long, default_value_t = 44100)]
    sample_rate: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    output: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Codebook { command } => match command {
            CodebookCommand::Gen {
                groups,
                code_len,
                seed,
                epsilon,
                out,
            } => {
                let book = generate_codebook::<f64>(groups, code_len, seed, epsilon)?;
                book.save(&out)?;
                println!(
                    "wrote {} codes + sync (len {}, epsilon {}, digest {}) to {}",
                    book.group_count(),
                    book.code_len,
                    book.epsilon_orth,
                    &book.digest()[..16],
                    out.display()
                );
            }
        },
        Command::Embed(args) => {
            let book = Codebook::<f64>::load(&args.codebook)?;
            let params = args.params.params(&book)?;
            let scheme: Scheme = args.scheme.parse()?;
            let input: Signal64 = read_wav(&args.input)?;
            let marked = embed_stream(
                &input,
                &EmbedSpec {
                    user: args.user,
                    scheme,
                    params,
                    codebook: &book,
                },
            )?;
            write_wav(&marked, &args.output)?;
            let snr = snr_db(&input, &marked)?;
            println!(
                "embedded user {} ({} scheme) into {} ({:.2} dB SNR)",
                args.user,
                scheme,
                args.output.display(),
                snr
            );
        }
        Command::Attack(args) => {
            let kind = match args.kind.as_str() {
                "crop" => AttackKind::Crop,
                "shift" => AttackKind::Shift,
                other => bail!("unknown attack kind {other:?} (expected crop or shift)"),
            };
            let input: Signal64 = read_wav(&args.input)?;
            let spec = AttackSpec {
                kind,
                amount: args.amount,
                position: if args.at == 0 {
                    AttackPosition::Head
                } else {
                    AttackPosition::AtOffset(args.at)
                },
            };
            let attacked = apply_attack(&input, &spec)?;
            write_wav(&attacked, &args.output)?;
            println!(
                "{} {} samples at offset {}: {} -> {} samples",
                kind,
                args.amount,
                args.at,
                input.len(),
                attacked.len()
            );
        }
        Command::Detect(args) => {
            let book = Codebook::<f64>::load(&args.codebook)?;
            let params = args.params.params(&book)?;
            let scheme: Scheme = args.scheme.parse()?;
            let policy = ThresholdPolicy {
                kappa: args.kappa,
                floor_abs: args.floor,
                tol: args.tol,
            };
            let input: Signal64 = read_wav(&args.input)?;
            match detect(scheme, &input, &book, &params, &policy) {
                Ok(trace) => {
                    if let Some(delay) = trace.sync_detected_delay {
                        println!("sync code at delay {delay} (base {})", book.sync.base_delay);
                    } else if trace.sync_missing {
                        println!("sync code missing; no delay correction applied");
                    }
                    if trace.hits.is_empty() {
                        println!("no hits");
                    }
                    for hit in &trace.hits {
                        println!(
                            "group {} delay {} corrected {} score {:.4} -> {}",
                            hit.group_id,
                            hit.detected_delay,
                            hit.corrected_delay,
                            hit.score,
                            match hit.traced_user {
                                Some(user) => format!("user {user}"),
                                None => "off-grid".to_string(),
                            }
                        );
                    }
                    println!(
                        "traced users: {}",
                        if trace.traced_users.is_empty() {
                            "none".to_string()
                        } else {
                            trace
                                .traced_users
                                .iter()
                                .map(|u| u.to_string())
                                .collect::<Vec<_>>()
                                .join(", ")
                        }
                    );
                    if let Some(path) = &args.report {
                        std::fs::write(path, trace.to_json()? + "\n")
                            .with_context(|| format!("writing {}", path.display()))?;
                    }
                }
                // A signal shorter than one frame carries no complete code.
                Err(Error::SignalTooShort { .. }) => {
                    println!("no hits");
                    println!("traced users: none");
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Experiment { command } => match command {
            ExperimentCommand::Run {
                config,
                copies,
                master_seed,
                rows,
                report,
            } => {
                let mut config = match config {
                    Some(path) => load_config(&path)?,
                    None => ExperimentConfig::default(),
                };
                if let Some(copies) = copies {
                    config.copies = copies;
                }
                if let Some(seed) = master_seed {
                    config.master_seed = seed;
                }
                let outcome = run_experiment(&config)?;
                for summary in &outcome.summaries {
                    println!(
                        "{}: {}/{} correct ({:.1}%) [exact-set {:.1}%, any-colluder {:.1}%]",
                        summary.scheme,
                        summary.correct_copies,
                        summary.copies,
                        summary.rate * 100.0,
                        summary.exact_set_rate * 100.0,
                        summary.any_colluder_rate * 100.0
                    );
                }
                if let Some(path) = rows {
                    emit_report(&outcome, ReportFormat::Rows, &path)?;
                    println!("rows -> {}", path.display());
                }
                if let Some(path) = report {
                    emit_report(&outcome, ReportFormat::Structured, &path)?;
                    println!("report -> {}", path.display());
                }
            }
        },
        Command::Synth(args) => {
            let kind: SynthKind = args.kind.parse()?;
            let signal: Signal64 = synth_signal(kind, args.length, args.sample_rate, args.seed);
            write_wav(&signal, &args.output)?;
            println!(
                "wrote {} samples of {} at {} Hz to {}",
                args.length,
                kind,
                args.sample_rate,
                args.output.display()
            );
        }
    }
    Ok(())
}
