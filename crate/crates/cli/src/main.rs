//! `sae` — batch small-area estimation runs from a config file.
//!
//! Subcommands: `estimate` (survey + population -> per-area estimates),
//! `diagnose` (per-area pooling-validity tests), `simulate` (synthetic
//! population end-to-end run with exact identification checks), and
//! `validate` (score estimate files against a truth file).
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 numerical error. Failures print a one-line JSON object on stderr.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod svg;

use config::RunConfig;
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "sae", version, about = "Small-area estimation from survey microdata")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; flags below override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    survey: Option<PathBuf>,

    #[arg(long, global = true)]
    population: Option<PathBuf>,

    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Root seed; all task seeds derive from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores). Ignored in sequential builds.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Ridge penalty for the membership fits.
    #[arg(long, global = true)]
    lambda: Option<f64>,

    /// Equivalence margin for the diagnostics.
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Test level for the diagnostics.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Bootstrap replicates for synthetic standard errors.
    /// 500 is the recommended count when enabling it by flag.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "500")]
    bootstrap: Option<usize>,

    /// Cap raw weights at this quantile.
    #[arg(long = "trim-quantile", global = true)]
    trim_quantile: Option<f64>,

    /// Write per-area weight CSV files.
    #[arg(long = "emit-weights", global = true)]
    emit_weights: bool,

    /// Write scatter SVGs where a truth reference exists.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate every area with the direct and synthetic estimators.
    Estimate,
    /// Run the per-area ignorability test panel.
    Diagnose,
    /// Generate a synthetic population, check identification exactly,
    /// then sample and estimate.
    Simulate,
    /// Score estimate columns against a truth file.
    Validate {
        /// CSV with header `area,<set>,<set>,...`.
        #[arg(long)]
        estimates: PathBuf,
        /// CSV with header `area,<truth>`.
        #[arg(long)]
        truth: PathBuf,
    },
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &cli.survey {
        cfg.paths.survey = Some(p.clone());
    }
    if let Some(p) = &cli.population {
        cfg.paths.population = Some(p.clone());
    }
    if let Some(p) = &cli.out {
        cfg.paths.out = Some(p.clone());
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(l) = cli.lambda {
        cfg.estimator.lambda = l;
    }
    if let Some(e) = cli.epsilon {
        cfg.diagnostics.epsilon = Some(e);
    }
    if let Some(a) = cli.alpha {
        cfg.diagnostics.alpha = a;
    }
    if let Some(b) = cli.bootstrap {
        cfg.estimator.bootstrap = b;
    }
    if let Some(q) = cli.trim_quantile {
        cfg.estimator.trim_quantile = Some(q);
    }
    if cli.emit_weights {
        cfg.estimator.emit_weights = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(feature = "parallel")]
fn setup_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn setup_threads(_threads: usize) {}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    setup_threads(cfg.threads);
    let out = cfg
        .paths
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Command::Estimate => commands::cmd_estimate(&cfg, &out, cli.svg),
        Command::Diagnose => commands::cmd_diagnose(&cfg, &out),
        Command::Simulate => commands::cmd_simulate(&cfg, &out, cli.svg),
        Command::Validate { estimates, truth } => {
            commands::cmd_validate(estimates, truth, &out, cli.svg)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        let payload = serde_json::json!({
            "error": { "kind": e.kind(), "message": e.message() }
        });
        eprintln!("{payload}");
        std::process::exit(e.exit_code());
    }
}
