//! Command-line front end: score, baseline, perturb, analyze, variants.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use config::Common;

#[derive(Parser)]
#[command(name = "qrelscore", version, about = "Reference-free relevance scoring for generated questions")]
struct Cli {
    /// TOML file with defaults for the shared options.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every dataset row under one variant.
    Score(commands::ScoreArgs),
    /// Estimate rescaling baselines from mismatched pairs.
    Baseline(commands::BaselineArgs),
    /// Build a labeled original/perturbed question set.
    Perturb(commands::PerturbArgs),
    /// Correlations, AUC, forward selection and distributions over a score table.
    Analyze(commands::AnalyzeArgs),
    /// Score every row under all ten variants.
    Variants,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(p) => Common::from_toml(p)?,
        None => Common::default(),
    };
    let common = cli.common.or(file).or(Common::defaults());
    if let Some(w) = common.workers {
        if w == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
    }
    let f64_mode = match common.precision.as_deref().unwrap_or("f32") {
        "f32" => false,
        "f64" => true,
        other => bail!("--precision must be f32 or f64, got {other}"),
    };
    macro_rules! dispatch {
        ($f:ty) => {
            match &cli.command {
                Command::Score(a) => commands::score::<$f>(&common, a),
                Command::Baseline(a) => commands::baseline::<$f>(&common, a),
                Command::Perturb(a) => commands::perturb(&common, a),
                Command::Analyze(a) => commands::analyze(&common, a),
                Command::Variants => commands::variants::<$f>(&common),
            }
        };
    }
    if f64_mode {
        dispatch!(f64)
    } else {
        dispatch!(f32)
    }
}
