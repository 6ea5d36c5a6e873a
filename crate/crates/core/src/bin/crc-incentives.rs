use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crc_incentives::config::{config_hash, example_profile, RunConfig};
use crc_incentives::model::CovariateProfile;
use crc_incentives::output::{run_population, run_single};
use crc_incentives::{Error, Result};

/// Optimal screening incentives under adversarial risk analysis.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal incentive for one citizen.
    Single {
        #[command(flatten)]
        common: CommonArgs,
        /// Inline JSON covariate profile.
        #[arg(long, conflicts_with = "patient")]
        profile: Option<String>,
        /// Name of a bundled example profile.
        #[arg(long, default_value = "young_high_risk")]
        patient: String,
    },
    /// Common and budget-constrained incentives for a synthetic cohort.
    Population {
        #[command(flatten)]
        common: CommonArgs,
        /// Incentive budget in euros for the per-patient allocation.
        #[arg(long)]
        budget: Option<f64>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; the bundled default when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides `engine.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `engine.k`.
    #[arg(long)]
    k: Option<usize>,
    /// Overrides `engine.n_runs`.
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

impl CommonArgs {
    fn load(&self) -> Result<(RunConfig, String)> {
        let (mut config, hash) = match &self.config {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
                let text = String::from_utf8(bytes).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
                let hash = config_hash(text.as_bytes());
                (RunConfig::from_json(&text)?, hash)
            }
            None => {
                let config = RunConfig::bundled_default();
                let hash = config_hash(config.to_json().as_bytes());
                (config, hash)
            }
        };
        if let Some(seed) = self.seed {
            config.engine.seed = seed;
        }
        if let Some(k) = self.k {
            config.engine.k = k;
        }
        if let Some(runs) = self.runs {
            config.engine.n_runs = runs;
        }
        config.validate()?;
        Ok((config, hash))
    }
}

fn run(cli: Cli) -> Result<String> {
    let threads = match &cli.command {
        Command::Single { common, .. } | Command::Population { common, .. } => common.threads,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Input(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Single {
            common,
            profile,
            patient,
        } => {
            let (config, hash) = common.load()?;
            let profile: CovariateProfile = match profile {
                Some(json) => serde_json::from_str(&json)?,
                None => example_profile(&patient)?,
            };
            profile.validate()?;
            let s = run_single(&config, &hash, profile, &common.out)?;
            Ok(format!(
                "action {} risk {:.5}: I* = {} EUR, psi = {:.2} EUR (replicated mean {:.2}, 90% [{}, {}])",
                s.action,
                s.risk,
                s.optimal_incentive,
                s.optimal_psi,
                s.replication.optimal_incentive.mean,
                s.replication.optimal_incentive.q05,
                s.replication.optimal_incentive.q95
            ))
        }
        Command::Population { common, budget } => {
            let (mut config, hash) = common.load()?;
            if budget.is_some() {
                config.cohort.budget = budget;
                config.validate()?;
            }
            let s = run_population(&config, &hash, &common.out)?;
            Ok(format!(
                "{} of {} screened: common I* = {} EUR, {:.2} EUR per case, expense {:.2} EUR; allocation expense {:.2} EUR",
                s.screened,
                s.cohort_size,
                s.marginal.common_incentive,
                s.marginal.mean_psi_per_case,
                s.marginal.total_expense,
                s.allocation.totals.total_expense
            ))
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(message) => {
            println!("{message}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
