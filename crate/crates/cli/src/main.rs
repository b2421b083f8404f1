//! `ais` — artificial-immune-system intrusion detection pipeline.
//!
//! Subcommands: `synth` generates a benchmark scenario, `train` fits a
//! schema and generates censored detectors (optionally maturing them),
//! `detect` classifies traffic, `dca` scores antigens from danger
//! signals, `evolve` adapts a detector set to a drifted self, and
//! `evaluate` computes metrics against ground truth.
//!
//! Exit codes: 0 success, 2 input error, 3 coverage failure, 4 artifact
//! (schema fingerprint) mismatch.

mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ais_core::config::EngineConfig;
use ais_core::{Error, Result};

use commands::Ctx;

#[derive(Parser)]
#[command(name = "ais", version, about = "Artificial-immune-system detection engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Engine configuration TOML (defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override every seed-bearing config section.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads. Outputs never depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Directory artifacts are written to.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Encode unknown categories as all-zeros one-hot (with a warning)
    /// instead of failing.
    #[arg(long)]
    lenient: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate detectors from a self-traffic CSV.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Normal-behavior training records.
        self_csv: PathBuf,
        /// Labeled antigens for clonal maturation (required when
        /// clonal.enabled is set).
        #[arg(long)]
        validation: Option<PathBuf>,
    },
    /// Classify traffic against a detector set.
    Detect {
        #[command(flatten)]
        common: CommonArgs,
        detectors: PathBuf,
        traffic_csv: PathBuf,
        /// Schema artifact (defaults to schema.json next to the detectors).
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Score antigens from a danger-signal stream.
    Dca {
        #[command(flatten)]
        common: CommonArgs,
        signals_csv: PathBuf,
    },
    /// Revalidate, prune, and re-seed a detector set against fresh self.
    Evolve {
        #[command(flatten)]
        common: CommonArgs,
        detectors: PathBuf,
        /// Gene library artifact (started empty when missing).
        library: PathBuf,
        new_self_csv: PathBuf,
        /// Schema artifact (defaults to schema.json next to the detectors).
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Join alerts or an MCAV report against ground-truth labels.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// alerts.jsonl or mcav.json.
        predictions: PathBuf,
        labels_csv: PathBuf,
        /// Detector set, for the report's detector_count.
        #[arg(long)]
        detectors: Option<PathBuf>,
    },
    /// Write the synthetic benchmark scenario CSVs.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Train { common, .. }
            | Command::Detect { common, .. }
            | Command::Dca { common, .. }
            | Command::Evolve { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Synth { common } => common,
        }
    }
}

fn build_ctx(common: &CommonArgs) -> Result<Ctx> {
    let mut config = match &common.config {
        Some(path) => EngineConfig::from_path(path)?,
        None => EngineConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.override_seed(seed);
    }
    if common.lenient {
        config.representation.lenient = true;
    }
    config.validate()?;
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(Error::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Input(format!("thread pool: {e}")))?;
    }
    let digest = config.digest();
    Ok(Ctx { config, digest, out_dir: common.out_dir.clone() })
}

fn run(cli: Cli) -> Result<()> {
    let ctx = build_ctx(cli.command.common())?;
    match &cli.command {
        Command::Train { self_csv, validation, .. } => {
            commands::cmd_train(&ctx, self_csv, validation.as_deref())
        }
        Command::Detect { detectors, traffic_csv, schema, .. } => {
            commands::cmd_detect(&ctx, detectors, traffic_csv, schema.as_ref())
        }
        Command::Dca { signals_csv, .. } => commands::cmd_dca(&ctx, signals_csv),
        Command::Evolve { detectors, library, new_self_csv, schema, .. } => {
            commands::cmd_evolve(&ctx, detectors, library, new_self_csv, schema.as_ref())
        }
        Command::Evaluate { predictions, labels_csv, detectors, .. } => {
            commands::cmd_evaluate(&ctx, predictions, labels_csv, detectors.as_ref())
        }
        Command::Synth { .. } => commands::cmd_synth(&ctx),
    }
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Coverage { .. } => 3,
        Error::SchemaMismatch { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code(&error))
        }
    }
}
