use crate::error::{Error, Result};
use crate::model::{Expectations, Factor, FactorSpace, GridTables, ProblemInstance};

use super::discrete::DiscreteEstimator;
use super::kde::{BandwidthRule, KdeEstimator};
use super::kernel::KernelSpec;

/// Running estimate of the external-factor distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorEstimator {
    Discrete(DiscreteEstimator),
    Kde(KdeEstimator),
}

impl FactorEstimator {
    /// Empty estimator matching the instance's factor space. For continuous
    /// spaces `kernel` defaults to the lowest-order shipped kernel valid for
    /// the declared smoothness.
    pub fn for_instance(
        instance: &ProblemInstance,
        kernel: Option<KernelSpec>,
        bandwidth_constant: f64,
    ) -> Result<Self> {
        match instance.factors() {
            FactorSpace::Finite { mass } => Ok(Self::Discrete(DiscreteEstimator::new(mass.len()))),
            FactorSpace::Continuous(c) => {
                let beta = c.smoothness.beta;
                let kernel = match kernel {
                    Some(k) => k,
                    None => KernelSpec::default_for(beta).ok_or_else(|| {
                        Error::param("kernel", format!("no shipped kernel covers beta = {beta}"))
                    })?,
                };
                Ok(Self::Kde(KdeEstimator::new(
                    c.dim(),
                    kernel,
                    BandwidthRule::new(beta, bandwidth_constant),
                )?))
            }
        }
    }

    pub fn observe(&mut self, factor: Factor<'_>) -> Result<()> {
        match (self, factor) {
            (Self::Discrete(d), Factor::Label(g)) => d.update(g),
            (Self::Kde(k), Factor::Point(x)) => k.push(x),
            _ => Err(Error::Domain("factor kind does not match the estimator".into())),
        }
    }

    pub fn samples(&self) -> u64 {
        match self {
            Self::Discrete(d) => d.samples(),
            Self::Kde(k) => k.samples(),
        }
    }
}

/// Plug-in `R̂(θ)`, `Ĉ(θ)` together with the number of factor samples
/// behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationEstimate {
    pub values: Expectations,
    pub samples: u64,
}

/// Evaluates plug-in expectations repeatedly for one instance, caching the
/// outcome functions on the quadrature grid for continuous factor spaces.
#[derive(Debug, Clone)]
pub struct PlugIn {
    tables: Option<GridTables>,
    weights: Vec<f64>,
    r_max: f64,
    c_max: f64,
}

impl PlugIn {
    pub fn new(instance: &ProblemInstance) -> Self {
        Self {
            tables: instance.grid_tables(),
            weights: Vec::new(),
            r_max: instance.r_max(),
            c_max: instance.c_max(),
        }
    }

    /// Writes `R̂`, `Ĉ` into `out`, clamped to `[0, r_max]` / `[0, c_max]`.
    pub fn estimate_into(
        &mut self,
        instance: &ProblemInstance,
        estimator: &FactorEstimator,
        out: &mut Expectations,
    ) {
        let contexts = instance.contexts().len();
        let resources = instance.resources();
        out.reward.resize(contexts, 0.0);
        out.consumption.resize_with(resources, Vec::new);
        for row in out.consumption.iter_mut() {
            row.resize(contexts, 0.0);
        }

        match (estimator, instance.factors()) {
            (FactorEstimator::Discrete(d), FactorSpace::Finite { .. }) => {
                let crate::model::OutcomeModel::Tabular {
                    reward,
                    consumption,
                } = instance.outcome_model()
                else {
                    unreachable!("finite factor spaces carry tabular outcomes");
                };
                self.weights.resize(d.support(), 0.0);
                d.mass_into(&mut self.weights);
                for ctx in 0..contexts {
                    out.reward[ctx] = weighted(&reward[ctx], &self.weights);
                    for i in 0..resources {
                        out.consumption[i][ctx] = weighted(&consumption[i][ctx], &self.weights);
                    }
                }
            }
            (FactorEstimator::Kde(k), FactorSpace::Continuous(c)) => {
                let tables = self.tables.as_ref().expect("continuous instance has grid tables");
                k.grid_weights_into(c.grid(), &mut self.weights);
                for ctx in 0..contexts {
                    out.reward[ctx] = weighted(&tables.reward[ctx], &self.weights);
                    for i in 0..resources {
                        out.consumption[i][ctx] = weighted(&tables.consumption[i][ctx], &self.weights);
                    }
                }
            }
            _ => panic!("factor estimator does not match the instance's factor space"),
        }

        for r in out.reward.iter_mut() {
            *r = r.clamp(0.0, self.r_max);
        }
        for c in out.consumption.iter_mut().flatten() {
            *c = c.clamp(0.0, self.c_max);
        }
    }
}

fn weighted(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

/// `R̂(θ) = E_{γ∼V̂}[r(θ, 1, γ)]` and `Ĉ(θ)` likewise, under the current
/// factor estimate. Cold-start estimators fall back to the uniform mass or
/// uniform density.
pub fn estimate_expectations(
    estimator: &FactorEstimator,
    instance: &ProblemInstance,
) -> Result<ExpectationEstimate> {
    let matches = matches!(
        (estimator, instance.factors()),
        (FactorEstimator::Discrete(_), FactorSpace::Finite { .. })
            | (FactorEstimator::Kde(_), FactorSpace::Continuous(_))
    );
    if !matches {
        return Err(Error::Domain(
            "factor estimator does not match the instance's factor space".into(),
        ));
    }
    if let (FactorEstimator::Discrete(d), FactorSpace::Finite { mass }) = (estimator, instance.factors()) {
        if d.support() != mass.len() {
            return Err(Error::Dimension("estimator support differs from factor support".into()));
        }
    }
    let mut values = Expectations::zeros(instance.contexts().len(), instance.resources());
    PlugIn::new(instance).estimate_into(instance, estimator, &mut values);
    Ok(ExpectationEstimate {
        values,
        samples: estimator.samples(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContextSpace, ContinuousFactor, Density, HolderClass, OutcomeModel};
    use crate::presets;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn balanced_samples_reproduce_benchmark_averages() {
        let inst = presets::benchmark_nondegenerate();
        let mut est = FactorEstimator::for_instance(&inst, None, 1.0).unwrap();
        est.observe(Factor::Label(0)).unwrap();
        est.observe(Factor::Label(1)).unwrap();
        let e = estimate_expectations(&est, &inst).unwrap();
        assert!(close(&e.values.reward, &[1.0, 1.2, 0.8]));
        assert!(close(&e.values.consumption[0], &[1.0, 2.0, 1.0]));
        assert!(close(&e.values.consumption[1], &[2.0, 1.0, 1.0]));
        assert_eq!(e.samples, 2);
    }

    #[test]
    fn point_mass_estimate() {
        let inst = presets::benchmark_nondegenerate();
        let mut est = FactorEstimator::for_instance(&inst, None, 1.0).unwrap();
        est.observe(Factor::Label(0)).unwrap();
        let e = estimate_expectations(&est, &inst).unwrap();
        assert_eq!(e.values.reward, vec![1.2, 1.3, 0.7]);
    }

    #[test]
    fn cold_start_is_uniform_plug_in() {
        let inst = presets::benchmark_nondegenerate();
        let est = FactorEstimator::for_instance(&inst, None, 1.0).unwrap();
        let e = estimate_expectations(&est, &inst).unwrap();
        assert_eq!(e.samples, 0);
        assert!(close(&e.values.reward, &inst.true_expectations().reward));
    }

    fn affine_instance() -> ProblemInstance {
        let factor = ContinuousFactor::new(
            1,
            Density::Beta { alpha: 2.0, beta: 2.0 },
            HolderClass { beta: 2, lipschitz: 12.0 },
            129,
        )
        .unwrap();
        ProblemInstance::new(
            ContextSpace::finite(vec![0.5, 0.5]).unwrap(),
            FactorSpace::Continuous(factor),
            OutcomeModel::Affine {
                reward_base: vec![0.2, 0.9],
                reward_slope: vec![vec![0.6], vec![-0.5]],
                consumption_base: vec![vec![0.1, 0.3]],
                consumption_slope: vec![vec![vec![0.8], vec![0.2]]],
            },
            vec![0.4],
            100,
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn kde_cold_start_uses_uniform_density() {
        let inst = affine_instance();
        let est = FactorEstimator::for_instance(&inst, None, 1.0).unwrap();
        let e = estimate_expectations(&est, &inst).unwrap();
        // E[γ] = 1/2 under the uniform fallback
        assert!(close(&e.values.reward, &[0.5, 0.65]));
        assert!(close(&e.values.consumption[0], &[0.5, 0.4]));
    }

    #[test]
    fn kde_plug_in_tracks_sample_mean() {
        let inst = affine_instance();
        let mut est = FactorEstimator::for_instance(&inst, None, 0.2).unwrap();
        for k in 0..200 {
            let x = 0.3 + 0.1 * ((k % 7) as f64 / 6.0);
            est.observe(Factor::Point(&[x])).unwrap();
        }
        let e = estimate_expectations(&est, &inst).unwrap();
        // sample mean ≈ 0.35; reward is affine so the plug-in sits near it
        let implied_mean = (e.values.reward[0] - 0.2) / 0.6;
        assert!((implied_mean - 0.35).abs() < 0.03, "{implied_mean}");
    }

    #[test]
    fn mismatched_estimator_is_rejected() {
        let inst = presets::benchmark_nondegenerate();
        let est = FactorEstimator::for_instance(&affine_instance(), None, 1.0).unwrap();
        assert!(estimate_expectations(&est, &inst).is_err());
    }
}
