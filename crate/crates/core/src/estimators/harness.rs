//! Statistical checks of the estimators: L1 concentration of the frequency
//! estimator and the error-rate direction of the kernel density estimator.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Density;
use crate::quadrature::{UnitCubeGrid, DEFAULT_POINTS_PER_AXIS};
use crate::rng;

use super::discrete::{weissman_threshold, DiscreteEstimator};
use super::kde::{BandwidthRule, KdeEstimator};
use super::kernel::KernelSpec;

pub const DEFAULT_TEST_MASS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];

#[derive(Debug, Clone)]
pub struct WeissmanParams {
    pub mass: Vec<f64>,
    pub samples: u64,
    pub epsilon: f64,
    pub reps: usize,
    /// Largest violation rate accepted; `ε` plus binomial slack.
    pub max_violation_rate: f64,
    pub seed: u64,
}

impl Default for WeissmanParams {
    fn default() -> Self {
        Self {
            mass: DEFAULT_TEST_MASS.to_vec(),
            samples: 1000,
            epsilon: 0.1,
            reps: 2000,
            max_violation_rate: 0.12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeissmanRow {
    pub rep: usize,
    pub samples: u64,
    pub l1_error: f64,
    pub threshold: f64,
    pub violated: bool,
}

#[derive(Debug, Clone)]
pub struct WeissmanReport {
    pub rows: Vec<WeissmanRow>,
    pub threshold: f64,
    pub violation_rate: f64,
    pub max_violation_rate: f64,
}

impl WeissmanReport {
    pub fn passed(&self) -> bool {
        self.violation_rate <= self.max_violation_rate
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rep", "m", "l1_error", "threshold", "violated"])?;
        for r in &self.rows {
            w.write_record([
                r.rep.to_string(),
                r.samples.to_string(),
                r.l1_error.to_string(),
                r.threshold.to_string(),
                (r.violated as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws `samples` points from `mass` in each repetition and counts how
/// often `‖p − p̂‖₁` reaches the concentration threshold.
pub fn weissman_suite(params: &WeissmanParams) -> Result<WeissmanReport> {
    if params.reps == 0 {
        return Err(Error::param("reps", "must be positive"));
    }
    let atoms = params.mass.len();
    let threshold = weissman_threshold(atoms as u32, params.samples, params.epsilon)?;
    let sampler = WeightedIndex::new(&params.mass)
        .map_err(|e| Error::param("mass", e.to_string()))?;

    let rows: Vec<WeissmanRow> = (0..params.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng::stream(params.seed, &[rep as u64]);
            let mut est = DiscreteEstimator::new(atoms);
            for _ in 0..params.samples {
                est.update(sampler.sample(&mut rng)).expect("label in range");
            }
            let l1_error: f64 = est
                .mass()
                .iter()
                .zip(&params.mass)
                .map(|(a, b)| (a - b).abs())
                .sum();
            WeissmanRow {
                rep,
                samples: params.samples,
                l1_error,
                threshold,
                violated: l1_error >= threshold,
            }
        })
        .collect();
    let violations = rows.iter().filter(|r| r.violated).count();
    Ok(WeissmanReport {
        violation_rate: violations as f64 / rows.len() as f64,
        rows,
        threshold,
        max_violation_rate: params.max_violation_rate,
    })
}

#[derive(Debug, Clone)]
pub struct KdeRateParams {
    /// Sample sizes, in increasing order.
    pub sample_sizes: Vec<u64>,
    pub reps: usize,
    pub density: Density,
    pub smoothness: u32,
    pub kernel: KernelSpec,
    pub bandwidth_constant: f64,
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for KdeRateParams {
    /// `Beta(2, 2)` has density `6x(1 − x)`, whose derivative is
    /// 12-Lipschitz, so it lies in `Σ(2, 12)`.
    fn default() -> Self {
        Self {
            sample_sizes: vec![100, 10_000],
            reps: 50,
            density: Density::Beta { alpha: 2.0, beta: 2.0 },
            smoothness: 2,
            kernel: KernelSpec::gaussian_order4(),
            bandwidth_constant: 1.0,
            grid_points: DEFAULT_POINTS_PER_AXIS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeRateRow {
    pub rep: usize,
    pub samples: u64,
    pub bandwidth: f64,
    pub sup_error: f64,
}

#[derive(Debug, Clone)]
pub struct KdeRateReport {
    pub rows: Vec<KdeRateRow>,
    /// `(m, median sup-grid error)` per sample size.
    pub medians: Vec<(u64, f64)>,
}

impl KdeRateReport {
    /// Median error strictly decreases along the sample sizes.
    pub fn passed(&self) -> bool {
        self.medians.windows(2).all(|w| w[1].1 < w[0].1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rep", "m", "bandwidth", "sup_error"])?;
        for r in &self.rows {
            w.write_record([
                r.rep.to_string(),
                r.samples.to_string(),
                r.bandwidth.to_string(),
                r.sup_error.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sup-norm error of the raw KDE over the grid nodes, for each sample size
/// and repetition, with one-dimensional samples from `params.density`.
pub fn kde_rate_suite(params: &KdeRateParams) -> Result<KdeRateReport> {
    if params.reps == 0 {
        return Err(Error::param("reps", "must be positive"));
    }
    if params.sample_sizes.is_empty() || params.sample_sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("sample_sizes", "need strictly increasing sizes"));
    }
    if params.sample_sizes[0] < 2 {
        return Err(Error::param("sample_sizes", "need at least 2 samples"));
    }
    let grid = UnitCubeGrid::new(1, params.grid_points)?;
    let truth: Vec<f64> = grid.points().map(|(x, _)| params.density.pdf(x)).collect();
    let rule = BandwidthRule::new(params.smoothness, params.bandwidth_constant);
    // validate once up front
    KdeEstimator::new(1, params.kernel, rule)?;

    let jobs: Vec<(usize, usize)> = (0..params.sample_sizes.len())
        .flat_map(|s| (0..params.reps).map(move |r| (s, r)))
        .collect();
    let rows: Vec<KdeRateRow> = jobs
        .into_par_iter()
        .map(|(s, rep)| {
            let m = params.sample_sizes[s];
            let mut rng = rng::stream(params.seed, &[m, rep as u64]);
            let mut est = KdeEstimator::new(1, params.kernel, rule).expect("validated");
            let mut x = [0.0];
            for _ in 0..m {
                params.density.sample_into(&mut rng, &mut x);
                est.push(&x).expect("sample in [0, 1]");
            }
            let h = est.bandwidth().expect("at least two samples");
            let sup_error = grid
                .points()
                .zip(&truth)
                .map(|((x, _), p)| (est.density(x, h).expect("valid query").value - p).abs())
                .fold(0.0, f64::max);
            KdeRateRow {
                rep,
                samples: m,
                bandwidth: h,
                sup_error,
            }
        })
        .collect();

    let medians = params
        .sample_sizes
        .iter()
        .map(|&m| {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.samples == m)
                .map(|r| r.sup_error)
                .collect();
            (m, median(errs))
        })
        .collect();
    Ok(KdeRateReport { rows, medians })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
