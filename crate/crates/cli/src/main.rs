//! Command-line driver wiring the screening pipeline into reproducible
//! batch runs.
//!
//! Exit codes: 0 on success, 2 on input/validation failure, 1 on runtime
//! failure. Every command is idempotent given identical inputs and seed,
//! and `--jobs` never changes outputs.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::ValidationError;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "liverscreen", version, about = "Liver fibrosis screening pipeline")]
struct Cli {
    /// JSON run-config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file and RUN_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = default). Never affects outputs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Axis filter, e.g. "contrast=NC,model=logreg|sgd".
    #[arg(long, global = true)]
    configs: Option<String>,
    /// Experiments per configuration.
    #[arg(long, global = true)]
    experiments: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom cohort (volumes, masks, ROIs, labels).
    Phantom,
    /// Extract feature cohort CSVs from volumes + ROI manifest.
    Extract,
    /// Run the configuration sweep and write results + summaries.
    Sweep,
    /// Rank features from sweep results.
    Rank,
    /// Train and evaluate the curated simple models.
    Simple,
    /// Run the cubic-ROI texture baseline.
    Baseline,
    /// Run the ROI-volume confounder audit.
    Audit,
    /// Render summary CSVs into a Markdown report.
    Report,
}

fn effective_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_ref())?;
    if let Ok(seed) = std::env::var("RUN_SEED") {
        cfg.master_seed = seed
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!(ValidationError(format!("RUN_SEED must be an integer, got '{seed}'"))))?;
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Some(expr) = &cli.configs {
        cfg.configs = Some(expr.clone());
    }
    if let Some(n) = cli.experiments {
        cfg.n_experiments = n;
    }
    if let Some(out) = &cli.out {
        match cli.command {
            Command::Phantom => cfg.data_dir = out.clone(),
            Command::Extract => cfg.features_dir = out.clone(),
            _ => cfg.out_dir = out.clone(),
        }
    }
    Ok(cfg)
}

fn is_validation(err: &anyhow::Error) -> bool {
    if err.downcast_ref::<ValidationError>().is_some() {
        return true;
    }
    if let Some(e) = err.downcast_ref::<liverscreen::Error>() {
        return matches!(
            e,
            liverscreen::Error::InvalidParameter(_)
                | liverscreen::Error::EmptyInput(_)
                | liverscreen::Error::UnknownFeature(_)
                | liverscreen::Error::Header(_)
                | liverscreen::Error::UnsupportedElementType(_)
                | liverscreen::Error::SchemaMismatch(_)
        );
    }
    if let Some(io) = err.downcast_ref::<std::io::Error>() {
        return io.kind() == std::io::ErrorKind::NotFound;
    }
    // Config parse problems arrive as serde/context errors.
    err.to_string().contains("parsing config") || err.to_string().contains("reading config")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match effective_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Phantom => commands::cmd_phantom(&cfg),
        Command::Extract => commands::cmd_extract(&cfg),
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::Rank => commands::cmd_rank(&cfg),
        Command::Simple => commands::cmd_simple(&cfg),
        Command::Baseline => commands::cmd_baseline(&cfg),
        Command::Audit => commands::cmd_audit(&cfg),
        Command::Report => commands::cmd_report(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_validation(&e) { 2 } else { 1 })
        }
    }
}
