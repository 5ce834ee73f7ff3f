//! Text format for problem instances.
//!
//! Instances are TOML documents: scalar `key = value` lines plus nested arrays
//! for matrices. A finite instance looks like
//!
//! ```toml
//! horizon = 5000
//! rho = [1.0, 1.0]
//! r_max = 1.3
//! c_max = 2.2
//!
//! [contexts]
//! mass = [0.3, 0.3, 0.4]
//!
//! [factors]
//! kind = "finite"
//! mass = [0.5, 0.5]
//!
//! [outcome]
//! kind = "tabular"
//! reward = [[1.2, 0.8], [1.3, 1.1], [0.7, 0.9]]
//! consumption = [
//!     [[0.9, 1.1], [1.8, 2.2], [1.2, 0.8]],
//!     [[2.1, 1.9], [0.8, 1.2], [0.9, 1.1]],
//! ]
//! ```
//!
//! Continuous factor spaces use `kind = "continuous"` with `dim`, `density`
//! (`"uniform"` or `"beta"` with `alpha`, `beta`), `smoothness`, `lipschitz`
//! and optionally `grid`, together with an `"affine"` outcome given by
//! `reward_base`, `reward_slope`, `consumption_base` and `consumption_slope`.
//! Keys outside the schema are rejected.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ContextSpace, ContinuousFactor, Density, FactorSpace, HolderClass, OutcomeModel, ProblemInstance,
};
use crate::quadrature::DEFAULT_POINTS_PER_AXIS;

/// Parses `text` into `T`, rejecting keys that `T` does not know about.
pub fn from_toml_str<T: DeserializeOwned + Serialize>(text: &str) -> Result<T> {
    let parse_err = |e: toml::de::Error| Error::Parse {
        line: e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0),
        message: e.message().to_string(),
    };
    let table: toml::Table = toml::from_str(text).map_err(parse_err)?;
    let doc: T = toml::from_str(text).map_err(parse_err)?;
    let known = toml::Table::try_from(&doc).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut unknown = Vec::new();
    collect_unknown(&table, &known, "", &mut unknown);
    if unknown.is_empty() {
        Ok(doc)
    } else {
        Err(Error::UnknownKeys(unknown))
    }
}

fn collect_unknown(given: &toml::Table, known: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (key, value) in given {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match (value, known.get(key)) {
            (_, None) => out.push(path),
            (toml::Value::Table(g), Some(toml::Value::Table(k))) => collect_unknown(g, k, &path, out),
            _ => {}
        }
    }
}

pub fn to_toml_string<T: Serialize>(doc: &T) -> Result<String> {
    toml::to_string(doc).map_err(|e| Error::Numeric(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    Finite,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityKind {
    Uniform,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Tabular,
    Affine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextsDoc {
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorsDoc {
    pub kind: FactorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDoc {
    pub kind: OutcomeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consumption: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_base: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_slope: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consumption_base: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consumption_slope: Option<Vec<Vec<Vec<f64>>>>,
}

/// Serialized form of a [`ProblemInstance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub horizon: u64,
    pub rho: Vec<f64>,
    pub r_max: f64,
    pub c_max: f64,
    pub contexts: ContextsDoc,
    pub factors: FactorsDoc,
    pub outcome: OutcomeDoc,
}

fn required<T>(value: Option<T>, field: &str, kind: &str) -> Result<T> {
    value.ok_or_else(|| Error::validation(field, format!("required for {kind}")))
}

fn forbid<T>(value: &Option<T>, field: &str, kind: &str) -> Result<()> {
    match value {
        Some(_) => Err(Error::validation(field, format!("not used by {kind}"))),
        None => Ok(()),
    }
}

impl InstanceDoc {
    pub fn from_instance(instance: &ProblemInstance) -> Self {
        let factors = match instance.factors() {
            FactorSpace::Finite { mass } => FactorsDoc {
                kind: FactorKind::Finite,
                mass: Some(mass.clone()),
                dim: None,
                density: None,
                alpha: None,
                beta: None,
                smoothness: None,
                lipschitz: None,
                grid: None,
            },
            FactorSpace::Continuous(c) => {
                let (density, alpha, beta) = match c.density {
                    Density::Uniform => (DensityKind::Uniform, None, None),
                    Density::Beta { alpha, beta } => (DensityKind::Beta, Some(alpha), Some(beta)),
                };
                FactorsDoc {
                    kind: FactorKind::Continuous,
                    mass: None,
                    dim: Some(c.dim()),
                    density: Some(density),
                    alpha,
                    beta,
                    smoothness: Some(c.smoothness.beta),
                    lipschitz: Some(c.smoothness.lipschitz),
                    grid: Some(c.grid().points_per_axis()),
                }
            }
        };
        let outcome = match instance.outcome_model() {
            OutcomeModel::Tabular { reward, consumption } => OutcomeDoc {
                kind: OutcomeKind::Tabular,
                reward: Some(reward.clone()),
                consumption: Some(consumption.clone()),
                reward_base: None,
                reward_slope: None,
                consumption_base: None,
                consumption_slope: None,
            },
            OutcomeModel::Affine {
                reward_base,
                reward_slope,
                consumption_base,
                consumption_slope,
            } => OutcomeDoc {
                kind: OutcomeKind::Affine,
                reward: None,
                consumption: None,
                reward_base: Some(reward_base.clone()),
                reward_slope: Some(reward_slope.clone()),
                consumption_base: Some(consumption_base.clone()),
                consumption_slope: Some(consumption_slope.clone()),
            },
        };
        Self {
            horizon: instance.horizon(),
            rho: instance.rho().to_vec(),
            r_max: instance.r_max(),
            c_max: instance.c_max(),
            contexts: ContextsDoc {
                mass: instance.contexts().mass().to_vec(),
            },
            factors,
            outcome,
        }
    }

    pub fn into_instance(self) -> Result<ProblemInstance> {
        let f = self.factors;
        let factors = match f.kind {
            FactorKind::Finite => {
                let kind = "finite factors";
                for (v, name) in [
                    (f.dim.is_some(), "factors.dim"),
                    (f.density.is_some(), "factors.density"),
                    (f.alpha.is_some(), "factors.alpha"),
                    (f.beta.is_some(), "factors.beta"),
                    (f.smoothness.is_some(), "factors.smoothness"),
                    (f.lipschitz.is_some(), "factors.lipschitz"),
                    (f.grid.is_some(), "factors.grid"),
                ] {
                    forbid(&v.then_some(()), name, kind)?;
                }
                FactorSpace::finite(required(f.mass, "factors.mass", kind)?)?
            }
            FactorKind::Continuous => {
                let kind = "continuous factors";
                forbid(&f.mass, "factors.mass", kind)?;
                let density = match required(f.density, "factors.density", kind)? {
                    DensityKind::Uniform => {
                        forbid(&f.alpha, "factors.alpha", "a uniform density")?;
                        forbid(&f.beta, "factors.beta", "a uniform density")?;
                        Density::Uniform
                    }
                    DensityKind::Beta => Density::Beta {
                        alpha: required(f.alpha, "factors.alpha", "a beta density")?,
                        beta: required(f.beta, "factors.beta", "a beta density")?,
                    },
                };
                FactorSpace::Continuous(ContinuousFactor::new(
                    required(f.dim, "factors.dim", kind)?,
                    density,
                    HolderClass {
                        beta: required(f.smoothness, "factors.smoothness", kind)?,
                        lipschitz: required(f.lipschitz, "factors.lipschitz", kind)?,
                    },
                    f.grid.unwrap_or(DEFAULT_POINTS_PER_AXIS),
                )?)
            }
        };
        let o = self.outcome;
        let outcome = match o.kind {
            OutcomeKind::Tabular => {
                let kind = "tabular outcomes";
                forbid(&o.reward_base, "outcome.reward_base", kind)?;
                forbid(&o.reward_slope, "outcome.reward_slope", kind)?;
                forbid(&o.consumption_base, "outcome.consumption_base", kind)?;
                forbid(&o.consumption_slope, "outcome.consumption_slope", kind)?;
                OutcomeModel::Tabular {
                    reward: required(o.reward, "outcome.reward", kind)?,
                    consumption: required(o.consumption, "outcome.consumption", kind)?,
                }
            }
            OutcomeKind::Affine => {
                let kind = "affine outcomes";
                forbid(&o.reward, "outcome.reward", kind)?;
                forbid(&o.consumption, "outcome.consumption", kind)?;
                OutcomeModel::Affine {
                    reward_base: required(o.reward_base, "outcome.reward_base", kind)?,
                    reward_slope: required(o.reward_slope, "outcome.reward_slope", kind)?,
                    consumption_base: required(o.consumption_base, "outcome.consumption_base", kind)?,
                    consumption_slope: required(o.consumption_slope, "outcome.consumption_slope", kind)?,
                }
            }
        };
        ProblemInstance::new(
            ContextSpace::finite(self.contexts.mass)?,
            factors,
            outcome,
            self.rho,
            self.horizon,
            self.r_max,
            self.c_max,
        )
    }
}

pub fn parse_instance(text: &str) -> Result<ProblemInstance> {
    from_toml_str::<InstanceDoc>(text)?.into_instance()
}

pub fn instance_to_string(instance: &ProblemInstance) -> Result<String> {
    to_toml_string(&InstanceDoc::from_instance(instance))
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn write_instance(path: impl AsRef<Path>, instance: &ProblemInstance) -> Result<()> {
    std::fs::write(path, instance_to_string(instance)?)?;
    Ok(())
}
