//! The three-context, two-factor, two-resource benchmark instance, with the
//! degenerate budget `ρ = (1, 1.15)` and the non-degenerate budget
//! `ρ = (1, 1)`.

use crate::error::{Error, Result};
use crate::model::{ContextSpace, FactorSpace, OutcomeModel, ProblemInstance};

pub const NONDEGENERATE: &str = "benchmark-nondegenerate";
pub const DEGENERATE: &str = "benchmark-degenerate";

pub const PRESET_NAMES: [&str; 2] = [NONDEGENERATE, DEGENERATE];

pub const DEFAULT_HORIZON: u64 = 5000;

pub const CONTEXT_MASS: [f64; 3] = [0.3, 0.3, 0.4];
pub const FACTOR_MASS: [f64; 2] = [0.5, 0.5];

pub const REWARD: [[f64; 2]; 3] = [[1.2, 0.8], [1.3, 1.1], [0.7, 0.9]];
pub const CONSUMPTION_1: [[f64; 2]; 3] = [[0.9, 1.1], [1.8, 2.2], [1.2, 0.8]];
pub const CONSUMPTION_2: [[f64; 2]; 3] = [[2.1, 1.9], [0.8, 1.2], [0.9, 1.1]];

fn rows(m: &[[f64; 2]; 3]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

fn benchmark(rho: [f64; 2]) -> ProblemInstance {
    ProblemInstance::new(
        ContextSpace::finite(CONTEXT_MASS.to_vec()).expect("valid mass"),
        FactorSpace::finite(FACTOR_MASS.to_vec()).expect("valid mass"),
        OutcomeModel::Tabular {
            reward: rows(&REWARD),
            consumption: vec![rows(&CONSUMPTION_1), rows(&CONSUMPTION_2)],
        },
        rho.to_vec(),
        DEFAULT_HORIZON,
        1.3,
        2.2,
    )
    .expect("benchmark instance is valid")
}

/// Unique, non-degenerate optimum `φ* = (2/3, 2/3, 1)`.
pub fn benchmark_nondegenerate() -> ProblemInstance {
    benchmark([1.0, 1.0])
}

/// Degenerate optimum `φ* = (1, 0.5, 1)`.
pub fn benchmark_degenerate() -> ProblemInstance {
    benchmark([1.0, 1.15])
}

pub fn by_name(name: &str) -> Result<ProblemInstance> {
    match name {
        NONDEGENERATE => Ok(benchmark_nondegenerate()),
        DEGENERATE => Ok(benchmark_degenerate()),
        other => Err(Error::validation(
            "preset",
            format!("unknown preset `{other}` (known: {})", PRESET_NAMES.join(", ")),
        )),
    }
}
