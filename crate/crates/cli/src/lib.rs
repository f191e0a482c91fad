//! Command-line experiments: dataset generation, meta-training, few-shot
//! adaptation, NMSE-versus-SNR sweeps and complexity benchmarks.
//!
//! [`run`] parses arguments and executes one subcommand, writing its
//! human-readable summary to the given sink. The binary maps errors to
//! exit codes with [`CliError::exit_code`].

pub mod config;
mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use commands::{AdaptSummary, BenchSummary, SweepRow};
use config::RawConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("I/O error on {}: {e}", path.display()))
    }
}

impl From<mcrnet::Error> for CliError {
    fn from(e: mcrnet::Error) -> Self {
        use mcrnet::Error as E;
        match e {
            E::Config(_) | E::Dimension { .. } | E::InvalidGeometry { .. } | E::ShapeMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            E::Divergence { .. } => CliError::Divergence(e.to_string()),
            E::Format { .. } | E::Io { .. } | E::UndefinedReference => CliError::Io(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "mcrnet",
    version,
    about = "Phase-shift feedback autoencoder experiments",
    after_help = "Any config key can be overridden with --<key>=<value>, e.g. --model.cr=1/4 --seed=3."
)]
struct Cli {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single-threaded, bit-reproducible execution (always on).
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a PSID dataset of `data.count` samples.
    Generate {
        #[arg(long, default_value = "psi.psid")]
        out: PathBuf,
        /// Also export the samples as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Meta-train from a fresh initialisation; writes weights.mcrw,
    /// report.csv and manifest.txt.
    MetaTrain {
        #[arg(long, default_value = "run")]
        out_dir: PathBuf,
        /// Conventional training on the same task stream instead.
        #[arg(long)]
        joint: bool,
    },
    /// Adapt trained weights to one held-out task and report query NMSE.
    Adapt {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 0)]
        task_seed: u64,
        #[arg(long, default_value_t = 100)]
        k_support: usize,
    },
    /// NMSE versus SNR; CSV columns cr,snr_db,nmse,seed,wall_ms.
    EvalSweep {
        #[arg(long)]
        weights: PathBuf,
        /// Comma-separated SNRs in dB (overrides eval.snr_list).
        #[arg(long)]
        snr_list: Option<String>,
        /// Expected compression ratio of the weights (overrides model.cr).
        #[arg(long)]
        cr: Option<String>,
        /// Samples per point (overrides eval.samples).
        #[arg(long)]
        samples: Option<usize>,
        /// Bypass the channel.
        #[arg(long)]
        ideal: bool,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter counts and median single-sample encode/decode times.
    Benchmark {
        /// Weights to time; a fresh model from the config otherwise.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// key=value output.
        #[arg(long)]
        machine_readable: bool,
    },
}

type Overrides = Vec<(String, String)>;

/// Splits `--<config key>=<value>` overrides from the arguments clap sees.
fn split_overrides(args: Vec<OsString>) -> Result<(Vec<OsString>, Overrides), CliError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        let key_value = a
            .to_str()
            .and_then(|s| s.strip_prefix("--"))
            .and_then(|s| s.split_once('='))
            .filter(|(k, _)| k.contains('.') || *k == "seed");
        match key_value {
            Some((k, v)) => {
                if !config::is_key(k) {
                    return Err(CliError::Config(format!("unknown config key `{k}`")));
                }
                overrides.push((k.to_string(), v.to_string()));
            }
            None => rest.push(a),
        }
    }
    Ok((rest, overrides))
}

/// Runs one command line (including the program name).
pub fn run<I, S>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let (args, overrides) = split_overrides(args.into_iter().map(Into::into).collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            write!(out, "{e}").map_err(|e| CliError::Io(e.to_string()))?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let mut raw = RawConfig::default();
    if let Some(path) = &cli.config {
        raw.apply_file(path)?;
    }
    for (k, v) in &overrides {
        raw.set(k, v)?;
    }
    match cli.command {
        Command::Generate { out: path, csv } => commands::generate(&raw.resolve()?, &path, csv.as_deref(), out),
        Command::MetaTrain { out_dir, joint } => commands::meta_train(&raw.resolve()?, &out_dir, joint, out),
        Command::Adapt { weights, task_seed, k_support } => {
            let summary = commands::adapt(&raw.resolve()?, &weights, task_seed, k_support)?;
            writeln!(
                out,
                "nmse_pre={}\nnmse_post={}\nimprovement_pct={}",
                summary.nmse_pre, summary.nmse_post, summary.improvement_pct
            )
            .map_err(|e| CliError::Io(e.to_string()))
        }
        Command::EvalSweep { weights, snr_list, cr, samples, ideal, out: path } => {
            if let Some(s) = snr_list {
                raw.set("eval.snr_list", &s)?;
            }
            if let Some(c) = cr {
                raw.set("model.cr", &c)?;
            }
            if let Some(n) = samples {
                raw.set("eval.samples", &n.to_string())?;
            }
            let cfg = raw.resolve()?;
            let rows = commands::eval_sweep(&cfg, &weights, ideal)?;
            let mut text = Vec::new();
            commands::write_sweep_csv(&cfg, &rows, &mut text).map_err(|e| CliError::Io(e.to_string()))?;
            match path {
                Some(p) => std::fs::write(&p, &text).map_err(|e| CliError::io(&p, e)),
                None => out.write_all(&text).map_err(|e| CliError::Io(e.to_string())),
            }
        }
        Command::Benchmark { weights, machine_readable } => {
            let s = commands::benchmark(&raw.resolve()?, weights.as_deref())?;
            commands::write_bench(&s, machine_readable, out).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}
