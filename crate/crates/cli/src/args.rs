use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Mode, PolicyName, Quantile};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "cbwk", version, about = "Re-solving controller for binary contextual bandits with knapsacks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a batched Monte-Carlo regret experiment and write a CSV report.
    Run(RunArgs),
    /// Write the effective experiment config to a file without running it.
    Config {
        #[command(flatten)]
        run: RunArgs,
        /// Destination of the config file.
        #[arg(long)]
        to: PathBuf,
    },
    /// Statistical checks of the estimators.
    Esttest {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Print the instance file of a preset.
    Instance {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Experiment config file; other flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in instance: benchmark-nondegenerate or benchmark-degenerate.
    #[arg(long, conflicts_with = "instance")]
    pub preset: Option<String>,
    /// Instance file.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<u64>>,
    /// Number of batches per horizon.
    #[arg(long)]
    pub estimations: Option<usize>,
    /// Trials per batch.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// 50 batches of 400 trials over T = 5000·2^k, k = 0..5.
    #[arg(long)]
    pub full_protocol: bool,
    /// Per-round CSV log of the first trial at each horizon.
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    /// Regret table with CI bounds for plotting.
    #[arg(long)]
    pub gnuplot: Option<PathBuf>,
    /// Student-t instead of normal quantile for the confidence interval.
    #[arg(long)]
    pub t_quantile: bool,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyName>,
    /// Kernel for continuous factors: gaussian, gaussian4, epanechnikov,
    /// epanechnikov4.
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub bandwidth_constant: Option<f64>,
    /// Run trials on one thread.
    #[arg(long)]
    pub serial: bool,
}

impl RunArgs {
    /// Effective config and the directory that relative instance paths
    /// resolve against. The result is validated.
    pub fn into_config(self) -> Result<(ExperimentConfig, PathBuf), CliError> {
        let (mut c, base) = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let c: ExperimentConfig = cbwk::instance_file::from_toml_str(&text)?;
                let base = path.parent().map(PathBuf::from).unwrap_or_default();
                (c, base)
            }
            None => {
                if self.preset.is_none() && self.instance.is_none() {
                    return Err(CliError::Config("one of --config, --preset or --instance is required".into()));
                }
                (ExperimentConfig::reduced(cbwk::presets::NONDEGENERATE, "regret.csv"), PathBuf::new())
            }
        };
        if let Some(p) = self.preset {
            c.preset = Some(p);
            c.instance_file = None;
            c.instance = None;
        }
        if let Some(p) = self.instance {
            c.preset = None;
            c.instance = None;
            c.instance_file = Some(std::path::absolute(p)?);
        }
        if self.full_protocol {
            c.use_full_protocol();
        }
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if let Some(v) = self.horizons {
            c.horizons = v;
        }
        if let Some(v) = self.estimations {
            c.estimations = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.out {
            c.out = v;
        }
        if let Some(v) = self.trajectories {
            c.trajectories = Some(v);
        }
        if let Some(v) = self.gnuplot {
            c.gnuplot = Some(v);
        }
        if self.t_quantile {
            c.quantile = Quantile::T;
        }
        if let Some(v) = self.policy {
            c.policy = v;
        }
        if let Some(v) = self.kernel {
            c.kernel = Some(v);
        }
        if let Some(v) = self.bandwidth_constant {
            c.bandwidth_constant = v;
        }
        if self.serial {
            c.serial = true;
        }
        c.validate()?;
        Ok((c, base))
    }
}

#[derive(Debug, Subcommand)]
pub enum Suite {
    /// L1 concentration of the frequency estimator.
    Weissman {
        /// Sampling mass; its length is the support size.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4")]
        mass: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        /// Largest violation rate that passes.
        #[arg(long, default_value_t = 0.12)]
        max_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-repetition CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sup-grid error of the kernel density estimator across sample sizes.
    KdeRate {
        #[arg(long, value_delimiter = ',', default_value = "100,10000")]
        sizes: Vec<u64>,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long, default_value = "gaussian4")]
        kernel: String,
        #[arg(long, default_value_t = 1.0)]
        bandwidth_constant: f64,
        /// Grid points per axis (odd).
        #[arg(long, default_value_t = cbwk::quadrature::DEFAULT_POINTS_PER_AXIS)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}
