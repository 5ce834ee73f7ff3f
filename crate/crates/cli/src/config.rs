use std::path::{Path, PathBuf};

use cbwk::estimators::KernelSpec;
use cbwk::instance_file::{self, InstanceDoc};
use cbwk::policy::EstimatorConfig;
use cbwk::presets;
use cbwk::simulator::{CiQuantile, ExperimentParams, PolicyKind};
use cbwk::{FeedbackMode, ProblemInstance};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Full,
    Partial,
}

impl From<Mode> for FeedbackMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Full => FeedbackMode::FullInfo,
            Mode::Partial => FeedbackMode::PartialInfo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    Resolving,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantile {
    Normal,
    T,
}

fn default_mode() -> Mode {
    Mode::Full
}

fn default_policy() -> PolicyName {
    PolicyName::Resolving
}

fn default_quantile() -> Quantile {
    Quantile::Normal
}

fn default_bandwidth_constant() -> f64 {
    1.0
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// A regret experiment: where the instance comes from, the Monte-Carlo
/// protocol, and where reports go.
///
/// Exactly one of `preset`, `instance_file` and the inline `[instance]` table
/// must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_file: Option<PathBuf>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub horizons: Vec<u64>,
    pub estimations: usize,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub out: PathBuf,
    #[serde(default = "default_policy")]
    pub policy: PolicyName,
    #[serde(default = "default_quantile")]
    pub quantile: Quantile,
    #[serde(default = "default_bandwidth_constant")]
    pub bandwidth_constant: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    /// Per-round log of the first trial at every horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<PathBuf>,
    /// `T mean lower upper` table for plotting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gnuplot: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub serial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceDoc>,
}

impl ExperimentConfig {
    /// Reduced protocol on a preset: 10 × 100 trials over `5000 · 2^k`,
    /// `k = 0..=3`.
    pub fn reduced(preset: &str, out: impl Into<PathBuf>) -> Self {
        let p = ExperimentParams::reduced_protocol(0);
        Self {
            preset: Some(preset.to_string()),
            instance_file: None,
            mode: Mode::Full,
            horizons: p.horizons,
            estimations: p.n_estimations,
            trials: p.n_trials,
            seed: 0,
            out: out.into(),
            policy: PolicyName::Resolving,
            quantile: Quantile::Normal,
            bandwidth_constant: 1.0,
            kernel: None,
            trajectories: None,
            gnuplot: None,
            serial: false,
            instance: None,
        }
    }

    /// 50 × 400 trials over `k = 0..=5`.
    pub fn use_full_protocol(&mut self) {
        let p = ExperimentParams::full_protocol(self.seed);
        self.horizons = p.horizons;
        self.estimations = p.n_estimations;
        self.trials = p.n_trials;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let sources = [self.preset.is_some(), self.instance_file.is_some(), self.instance.is_some()];
        match sources.iter().filter(|s| **s).count() {
            1 => {}
            0 => return Err(CliError::Config("one of preset, instance_file or [instance] is required".into())),
            _ => return Err(CliError::Config("preset, instance_file and [instance] are mutually exclusive".into())),
        }
        if let Some(p) = &self.preset {
            if !presets::PRESET_NAMES.contains(&p.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown preset `{p}` (expected one of {})",
                    presets::PRESET_NAMES.join(", ")
                )));
            }
        }
        if self.horizons.is_empty() {
            return Err(CliError::Config("horizons must not be empty".into()));
        }
        if self.horizons[0] == 0 || self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("horizons must be positive and strictly increasing".into()));
        }
        if self.estimations < 2 {
            return Err(CliError::Config("estimations must be at least 2".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials must be positive".into()));
        }
        if !(self.bandwidth_constant > 0.0 && self.bandwidth_constant.is_finite()) {
            return Err(CliError::Config("bandwidth_constant must be positive".into()));
        }
        if let Some(k) = &self.kernel {
            if KernelSpec::by_name(k).is_none() {
                return Err(CliError::Config(format!("unknown kernel `{k}`")));
            }
        }
        Ok(())
    }

    /// Loads or builds the instance. Relative instance paths resolve against
    /// `base`.
    pub fn resolve_instance(&self, base: &Path) -> Result<ProblemInstance, CliError> {
        let inst = if let Some(p) = &self.preset {
            presets::by_name(p)?
        } else if let Some(path) = &self.instance_file {
            instance_file::read_instance(base.join(path))?
        } else if let Some(doc) = &self.instance {
            doc.clone().into_instance()?
        } else {
            return Err(CliError::Config("no instance given".into()));
        };
        Ok(inst)
    }

    pub fn policy_kind(&self) -> PolicyKind {
        match self.policy {
            PolicyName::Static => PolicyKind::StaticFluid,
            PolicyName::Resolving => PolicyKind::ReSolving(EstimatorConfig {
                kernel: self.kernel.as_deref().and_then(KernelSpec::by_name),
                bandwidth_constant: self.bandwidth_constant,
            }),
        }
    }

    pub fn params(&self) -> ExperimentParams {
        ExperimentParams {
            horizons: self.horizons.clone(),
            n_estimations: self.estimations,
            n_trials: self.trials,
            master_seed: self.seed,
            quantile: match self.quantile {
                Quantile::Normal => CiQuantile::Normal,
                Quantile::T => CiQuantile::StudentT,
            },
            parallel: !self.serial,
        }
    }
}

/// Parses and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig = instance_file::from_toml_str(text)?;
    config.validate()?;
    Ok(config)
}

pub fn config_to_string(config: &ExperimentConfig) -> Result<String, CliError> {
    Ok(instance_file::to_toml_string(config)?)
}

pub fn save_config(path: impl AsRef<Path>, config: &ExperimentConfig) -> Result<(), CliError> {
    std::fs::write(path, config_to_string(config)?)?;
    Ok(())
}
