//! Trial execution and batched Monte-Carlo regret estimation.
//!
//! For each horizon `T` an experiment runs `n_estimations` batches of
//! `n_trials` independent trials. Each batch mean is one estimate of the
//! expected accumulated reward; the regret and its 99% confidence interval
//! are computed across the batch means. Every trial draws from its own stream
//! keyed by `(master_seed, T, batch, trial)`, so serial and parallel runs
//! produce identical reports.

use std::io::Write;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::{Action, Density, Factor, FactorSpace, Outcome, ProblemInstance};
use crate::policy::{
    ActionDecision, EstimatorConfig, FeedbackMode, Policy, ReSolvingPolicy, StaticFluidPolicy,
};
use crate::rng::{self, StreamRng};

/// Two-sided 99% normal quantile.
pub const NORMAL_Q99: f64 = 2.576;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    ReSolving(EstimatorConfig),
    StaticFluid,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::ReSolving(_) => "resolving",
            PolicyKind::StaticFluid => "static",
        }
    }
}

impl Default for PolicyKind {
    fn default() -> Self {
        PolicyKind::ReSolving(EstimatorConfig::default())
    }
}

/// Samples contexts and external factors for one instance.
#[derive(Debug, Clone)]
pub struct Environment {
    contexts: WeightedIndex<f64>,
    factors: FactorSampler,
}

#[derive(Debug, Clone)]
enum FactorSampler {
    Finite(WeightedIndex<f64>),
    Continuous(Density),
}

impl Environment {
    pub fn new(instance: &ProblemInstance) -> Result<Self> {
        let contexts = WeightedIndex::new(instance.contexts().mass())
            .map_err(|e| Error::validation("contexts.mass", e.to_string()))?;
        let factors = match instance.factors() {
            FactorSpace::Finite { mass } => FactorSampler::Finite(
                WeightedIndex::new(mass).map_err(|e| Error::validation("factors.mass", e.to_string()))?,
            ),
            FactorSpace::Continuous(c) => FactorSampler::Continuous(c.density),
        };
        Ok(Self { contexts, factors })
    }

    pub fn sample_context(&self, rng: &mut StreamRng) -> usize {
        self.contexts.sample(rng)
    }

    /// Writes a continuous draw into `point`; finite draws return a label.
    pub fn sample_factor<'a>(&self, rng: &mut StreamRng, point: &'a mut [f64]) -> Factor<'a> {
        match &self.factors {
            FactorSampler::Finite(w) => Factor::Label(w.sample(rng)),
            FactorSampler::Continuous(d) => {
                d.sample_into(rng, point);
                Factor::Point(point)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub accumulated_reward: f64,
    /// Last round in which the policy could still act: the round whose
    /// consumption triggered the stop, or `T` if the budget lasted.
    pub stop_time: u64,
    /// Number of rounds with the active action.
    pub actions_taken: u64,
    /// Stream key of the trial.
    pub seed: u64,
}

/// One executed round, reported to trial observers.
#[derive(Debug, Clone)]
pub struct RoundRecord<'a> {
    pub round: u64,
    pub context: usize,
    pub factor: Factor<'a>,
    pub decision: &'a ActionDecision,
    pub outcome: &'a Outcome,
    pub remaining: &'a [f64],
    /// Factor samples available to the policy after this round.
    pub observed_factors: u64,
}

pub fn run_trial(
    instance: &Arc<ProblemInstance>,
    mode: FeedbackMode,
    kind: &PolicyKind,
    seed: u64,
) -> Result<TrialResult> {
    run_trial_observed(instance, mode, kind, seed, |_| {})
}

/// Like [`run_trial`], calling `observer` after every executed round.
pub fn run_trial_observed(
    instance: &Arc<ProblemInstance>,
    mode: FeedbackMode,
    kind: &PolicyKind,
    seed: u64,
    observer: impl FnMut(&RoundRecord<'_>),
) -> Result<TrialResult> {
    let env = Environment::new(instance)?;
    match kind {
        PolicyKind::ReSolving(config) => {
            let policy = ReSolvingPolicy::new(Arc::clone(instance), mode, *config)?;
            Ok(drive(instance, &env, policy, seed, observer, |p| p.observed_factors()))
        }
        PolicyKind::StaticFluid => {
            let policy = StaticFluidPolicy::new(instance)?;
            Ok(drive(instance, &env, policy, seed, observer, |_| 0))
        }
    }
}

fn drive<P: Policy>(
    instance: &ProblemInstance,
    env: &Environment,
    mut policy: P,
    seed: u64,
    mut observer: impl FnMut(&RoundRecord<'_>),
    mut observed: impl FnMut(&P) -> u64,
) -> TrialResult {
    let mut rng = rng::stream(seed, &[]);
    let dim = instance.factors().width();
    let mut point = vec![0.0; dim];
    let mut outcome = Outcome::zero(instance.resources());
    let mut reward = 0.0;
    let mut actions = 0;

    for round in 1..=instance.horizon() {
        if policy.is_stopped() {
            break;
        }
        let context = env.sample_context(&mut rng);
        let factor = env.sample_factor(&mut rng, &mut point);
        let decision = policy.step(context, &mut rng);
        outcome.reward = instance.evaluate_into(context, decision.action, factor, &mut outcome.consumption);
        reward += outcome.reward;
        if decision.action == Action::Active {
            actions += 1;
        }
        policy.observe(&decision, context, factor, &outcome);
        observer(&RoundRecord {
            round,
            context,
            factor,
            decision: &decision,
            outcome: &outcome,
            remaining: policy.ledger().remaining(),
            observed_factors: observed(&policy),
        });
    }

    let stop_time = match policy.ledger().stopped_after() {
        Some(r) => r.max(1),
        None => instance.horizon(),
    };
    TrialResult {
        accumulated_reward: reward,
        stop_time,
        actions_taken: actions,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiQuantile {
    Normal,
    StudentT,
}

impl CiQuantile {
    /// Two-sided 99% quantile for `n` batch means.
    pub fn value(self, n: usize) -> f64 {
        match self {
            CiQuantile::Normal => NORMAL_Q99,
            CiQuantile::StudentT => StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .expect("n >= 2")
                .inverse_cdf(0.995),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentParams {
    pub horizons: Vec<u64>,
    pub n_estimations: usize,
    pub n_trials: usize,
    pub master_seed: u64,
    pub quantile: CiQuantile,
    pub parallel: bool,
}

impl ExperimentParams {
    /// 50 batches of 400 trials over `T = 5000 · 2^k`, `k = 0..=5`.
    pub fn full_protocol(master_seed: u64) -> Self {
        Self {
            horizons: (0..=5).map(|k| 5000 << k).collect(),
            n_estimations: 50,
            n_trials: 400,
            master_seed,
            quantile: CiQuantile::Normal,
            parallel: true,
        }
    }

    /// 10 batches of 100 trials over `k = 0..=3`.
    pub fn reduced_protocol(master_seed: u64) -> Self {
        Self {
            horizons: (0..=3).map(|k| 5000 << k).collect(),
            n_estimations: 10,
            n_trials: 100,
            ..Self::full_protocol(master_seed)
        }
    }
}

/// Trial stream key for `(master, T, batch, trial)`.
pub fn trial_seed(master: u64, horizon: u64, batch: usize, trial: usize) -> u64 {
    rng::stream_key(master, &[horizon, batch as u64, trial as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSummary {
    pub horizon: u64,
    pub fluid_value: f64,
    pub mean_reward: f64,
    pub mean_regret: f64,
    pub ci_half_width: f64,
    /// Mean accumulated reward of each batch.
    pub batch_means: Vec<f64>,
    pub mean_stop_time: f64,
    pub mean_actions: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub mode: FeedbackMode,
    pub policy: &'static str,
    pub n_estimations: usize,
    pub n_trials: usize,
    pub master_seed: u64,
    pub horizons: Vec<HorizonSummary>,
}

impl RegretReport {
    pub fn horizon(&self, horizon: u64) -> Option<&HorizonSummary> {
        self.horizons.iter().find(|h| h.horizon == horizon)
    }

    /// Horizons whose mean regret is below zero by more than the CI
    /// half-width. The fluid value upper-bounds any policy, so this should be
    /// empty.
    pub fn negative_regret_horizons(&self) -> Vec<u64> {
        self.horizons
            .iter()
            .filter(|h| h.mean_regret < -h.ci_half_width)
            .map(|h| h.horizon)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W, slope: Option<f64>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "T",
            "mode",
            "fluid_value",
            "mean_regret",
            "ci99_halfwidth",
            "n_estimations",
            "n_trials",
            "slope_global",
        ])?;
        let slope = slope.map(|s| s.to_string()).unwrap_or_default();
        for h in &self.horizons {
            w.write_record([
                h.horizon.to_string(),
                self.mode.as_str().to_string(),
                h.fluid_value.to_string(),
                h.mean_regret.to_string(),
                h.ci_half_width.to_string(),
                self.n_estimations.to_string(),
                self.n_trials.to_string(),
                slope.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Whitespace-separated `T mean lower upper` rows for line-plus-band plots.
    pub fn write_gnuplot<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# T mean_regret lower upper ({} feedback)", self.mode.as_str())?;
        for h in &self.horizons {
            writeln!(
                out,
                "{} {} {} {}",
                h.horizon,
                h.mean_regret,
                h.mean_regret - h.ci_half_width,
                h.mean_regret + h.ci_half_width
            )?;
        }
        Ok(())
    }
}

/// Mean and 99% CI half-width `q · s / √n` of batch means, `s` the sample
/// standard deviation.
pub fn batch_interval(batch_means: &[f64], quantile: CiQuantile) -> (f64, f64) {
    let n = batch_means.len();
    let mean = batch_means.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = batch_means.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, quantile.value(n) * var.sqrt() / (n as f64).sqrt())
}

pub fn run_experiment(
    instance: &ProblemInstance,
    mode: FeedbackMode,
    kind: &PolicyKind,
    params: &ExperimentParams,
) -> Result<RegretReport> {
    if params.n_estimations < 2 {
        return Err(Error::param("n_estimations", "need at least 2 batches"));
    }
    if params.n_trials == 0 {
        return Err(Error::param("n_trials", "need at least 1 trial per batch"));
    }
    if params.horizons.is_empty() {
        return Err(Error::param("horizons", "need at least one horizon"));
    }

    let mut horizons = Vec::with_capacity(params.horizons.len());
    for &horizon in &params.horizons {
        let inst = Arc::new(instance.with_horizon(horizon)?);
        let fluid_value = inst.fluid_value()?;
        let jobs: Vec<(usize, usize)> = (0..params.n_estimations)
            .flat_map(|b| (0..params.n_trials).map(move |t| (b, t)))
            .collect();
        let run = |&(b, t): &(usize, usize)| {
            run_trial(&inst, mode, kind, trial_seed(params.master_seed, horizon, b, t))
        };
        let results: Vec<TrialResult> = if params.parallel {
            jobs.par_iter().map(run).collect::<Result<_>>()?
        } else {
            jobs.iter().map(run).collect::<Result<_>>()?
        };

        let batch_means: Vec<f64> = results
            .chunks_exact(params.n_trials)
            .map(|batch| batch.iter().map(|r| r.accumulated_reward).sum::<f64>() / params.n_trials as f64)
            .collect();
        let (mean_reward, ci_half_width) = batch_interval(&batch_means, params.quantile);
        let count = results.len() as f64;
        horizons.push(HorizonSummary {
            horizon,
            fluid_value,
            mean_reward,
            mean_regret: fluid_value - mean_reward,
            ci_half_width,
            batch_means,
            mean_stop_time: results.iter().map(|r| r.stop_time as f64).sum::<f64>() / count,
            mean_actions: results.iter().map(|r| r.actions_taken as f64).sum::<f64>() / count,
        });
    }
    Ok(RegretReport {
        mode,
        policy: kind.name(),
        n_estimations: params.n_estimations,
        n_trials: params.n_trials,
        master_seed: params.master_seed,
        horizons,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Horizons left out for nonpositive mean regret.
    pub excluded: Vec<u64>,
}

/// Least-squares slope of `log(mean regret)` against `log T`.
pub fn fit_loglog_slope(report: &RegretReport) -> Result<SlopeFit> {
    let points: Vec<(u64, f64)> = report.horizons.iter().map(|h| (h.horizon, h.mean_regret)).collect();
    loglog_slope(&points)
}

pub fn loglog_slope(points: &[(u64, f64)]) -> Result<SlopeFit> {
    let (kept, dropped): (Vec<_>, Vec<_>) = points.iter().partition(|(_, r)| *r > 0.0);
    if kept.len() < 3 {
        return Err(Error::param(
            "horizons",
            format!("need >= 3 horizons with positive regret, have {}", kept.len()),
        ));
    }
    let xs: Vec<f64> = kept.iter().map(|(t, _)| (*t as f64).ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|(_, r)| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::param("horizons", "need at least two distinct horizons"));
    }
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        excluded: dropped.iter().map(|(t, _)| *t).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn slope_of_synthetic_curves() {
        let hs = [5000u64, 10000, 20000, 40000];
        let sqrt: Vec<_> = hs.iter().map(|&t| (t, 0.7 * (t as f64).sqrt())).collect();
        assert!((loglog_slope(&sqrt).unwrap().slope - 0.5).abs() < 1e-12);
        let flat: Vec<_> = hs.iter().map(|&t| (t, 3.0)).collect();
        assert!(loglog_slope(&flat).unwrap().slope.abs() < 1e-12);
        let linear: Vec<_> = hs.iter().map(|&t| (t, 0.01 * t as f64)).collect();
        assert!((loglog_slope(&linear).unwrap().slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slope_excludes_nonpositive() {
        let pts = [(100, 1.0), (200, -1.0), (400, 4.0), (800, 8.0)];
        let fit = loglog_slope(&pts).unwrap();
        assert_eq!(fit.excluded, vec![200]);
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!(loglog_slope(&[(1, 1.0), (2, 0.0), (3, 1.0)]).is_err());
    }

    #[test]
    fn batch_interval_arithmetic() {
        // mean 2.5, sample variance 5/3
        let (m, hw) = batch_interval(&[1.0, 2.0, 3.0, 4.0], CiQuantile::Normal);
        assert_eq!(m, 2.5);
        assert!((hw - 2.576 * (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        let (_, t) = batch_interval(&[1.0, 2.0, 3.0, 4.0], CiQuantile::StudentT);
        // t_{0.995, 3} = 5.8409
        assert!((t - 5.840_909 * (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-4);
        assert_eq!(batch_interval(&[7.0, 7.0, 7.0], CiQuantile::Normal), (7.0, 0.0));
    }

    #[test]
    fn trial_is_deterministic() {
        let inst = Arc::new(presets::benchmark_nondegenerate().with_horizon(300).unwrap());
        let kind = PolicyKind::default();
        let a = run_trial(&inst, FeedbackMode::FullInfo, &kind, 11).unwrap();
        let b = run_trial(&inst, FeedbackMode::FullInfo, &kind, 11).unwrap();
        assert_eq!(a, b);
        let c = run_trial(&inst, FeedbackMode::FullInfo, &kind, 12).unwrap();
        assert_ne!(a.accumulated_reward, c.accumulated_reward);
    }

    #[test]
    fn small_experiment_shape() {
        let params = ExperimentParams {
            horizons: vec![200, 400],
            n_estimations: 3,
            n_trials: 4,
            master_seed: 5,
            quantile: CiQuantile::Normal,
            parallel: false,
        };
        let report = run_experiment(
            &presets::benchmark_nondegenerate(),
            FeedbackMode::FullInfo,
            &PolicyKind::default(),
            &params,
        )
        .unwrap();
        assert_eq!(report.horizons.len(), 2);
        let h = &report.horizons[0];
        assert_eq!(h.batch_means.len(), 3);
        assert!((h.fluid_value - 200.0 * 0.76).abs() < 1e-9);
        assert!((h.mean_regret - (h.fluid_value - h.mean_reward)).abs() < 1e-12);
        assert!(h.ci_half_width >= 0.0);

        let mut csv_out = Vec::new();
        report.write_csv(&mut csv_out, Some(0.25)).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "T,mode,fluid_value,mean_regret,ci99_halfwidth,n_estimations,n_trials,slope_global"
        );
        assert!(lines.next().unwrap().starts_with("200,full,"));
    }

    #[test]
    fn experiment_validates_counts() {
        let mut params = ExperimentParams::reduced_protocol(0);
        params.n_estimations = 1;
        let inst = presets::benchmark_nondegenerate();
        assert!(run_experiment(&inst, FeedbackMode::FullInfo, &PolicyKind::default(), &params).is_err());
    }

    #[test]
    fn protocols() {
        let p = ExperimentParams::full_protocol(1);
        assert_eq!(p.horizons, vec![5000, 10000, 20000, 40000, 80000, 160000]);
        assert_eq!((p.n_estimations, p.n_trials), (50, 400));
        let r = ExperimentParams::reduced_protocol(1);
        assert_eq!(r.horizons, vec![5000, 10000, 20000, 40000]);
        assert_eq!((r.n_estimations, r.n_trials), (10, 100));
    }
}
