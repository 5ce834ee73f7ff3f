//! The re-solving controller and a static fluid baseline.
//!
//! Each round the re-solving policy computes the average remaining budget
//! `ρ_t = B_t / (T − t + 1)`, solves the estimated fluid program at `ρ_t`,
//! and serves the arriving context with probability `φ̂*_t(θ_t)`. Both
//! policies share the [`BudgetLedger`], which applies the stopping rule.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::{DiscreteEstimator, FactorEstimator, KernelSpec, PlugIn};
use crate::lp::{FluidLp, FluidSolution, SimplexSolver, SolveStatus};
use crate::model::{Action, Expectations, Factor, Outcome, ProblemInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeedbackMode {
    /// The external factor is revealed every round.
    FullInfo,
    /// The external factor is revealed only when the active action is taken.
    PartialInfo,
}

impl FeedbackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::FullInfo => "full",
            FeedbackMode::PartialInfo => "partial",
        }
    }

    pub fn reveals(self, action: Action) -> bool {
        match self {
            FeedbackMode::FullInfo => true,
            FeedbackMode::PartialInfo => action.is_active(),
        }
    }
}

impl std::str::FromStr for FeedbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "full-info" => Ok(FeedbackMode::FullInfo),
            "partial" | "partial-info" => Ok(FeedbackMode::PartialInfo),
            other => Err(Error::validation("mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// Stopping threshold for an instance: `c_max`, but never below 1.
///
/// With consumption bounded by `c_max`, stopping once some `B^i` drops below
/// `c_max` guarantees the budget is never overdrawn.
pub fn stop_threshold(instance: &ProblemInstance) -> f64 {
    instance.c_max().max(1.0)
}

/// Remaining budget `B_t`, the round counter and the stopping flag.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    remaining: Vec<f64>,
    round: u64,
    horizon: u64,
    threshold: f64,
    stopped_after: Option<u64>,
}

impl BudgetLedger {
    pub fn new(rho: &[f64], horizon: u64, threshold: f64) -> Self {
        let remaining: Vec<f64> = rho.iter().map(|r| r * horizon as f64).collect();
        let mut ledger = Self {
            remaining,
            round: 1,
            horizon,
            threshold,
            stopped_after: None,
        };
        // an initial budget already under the threshold: play null from round 1
        if ledger.remaining.iter().any(|b| *b < threshold) {
            ledger.stopped_after = Some(0);
        }
        ledger
    }

    pub fn for_instance(instance: &ProblemInstance) -> Self {
        Self::new(instance.rho(), instance.horizon(), stop_threshold(instance))
    }

    /// Current 1-based round `t`.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn remaining(&self) -> &[f64] {
        &self.remaining
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped_after.is_some() || self.round > self.horizon
    }

    /// Round whose consumption triggered the stop, if any; 0 if the initial
    /// budget was already below the threshold.
    pub fn stopped_after(&self) -> Option<u64> {
        self.stopped_after
    }

    /// `ρ_t = B_t / (T − t + 1)`, clamped at zero.
    pub fn rate_into(&self, out: &mut Vec<f64>) {
        let left = (self.horizon - self.round + 1) as f64;
        out.clear();
        out.extend(self.remaining.iter().map(|b| (b / left).max(0.0)));
    }

    pub fn rate(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.rate_into(&mut out);
        out
    }

    /// `B_{t+1} = B_t − c_t`, then advance `t` and apply the stopping rule.
    pub fn charge(&mut self, consumption: &[f64]) {
        for (b, c) in self.remaining.iter_mut().zip(consumption) {
            *b -= c;
        }
        if self.stopped_after.is_none() && self.remaining.iter().any(|b| *b < self.threshold) {
            self.stopped_after = Some(self.round);
        }
        self.round += 1;
    }
}

/// What a policy did in one round, plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDecision {
    pub action: Action,
    pub phi_at_context: f64,
    /// `ρ_t` used for the solve.
    pub rate: Vec<f64>,
    pub lp_objective: f64,
    pub lp_failed: bool,
}

impl ActionDecision {
    fn null(rate: Vec<f64>) -> Self {
        Self {
            action: Action::Null,
            phi_at_context: 0.0,
            rate,
            lp_objective: 0.0,
            lp_failed: false,
        }
    }
}

/// Bernoulli convention shared by all policies: serve iff `draw < φ`.
#[inline]
pub fn bernoulli_action(draw: f64, phi: f64) -> Action {
    if draw < phi {
        Action::Active
    } else {
        Action::Null
    }
}

pub trait Policy {
    /// Decide for context `context` given one uniform draw in `[0, 1)`.
    fn decide(&mut self, context: usize, draw: f64) -> ActionDecision;

    /// Record the round's context, realized factor and outcome.
    fn observe(&mut self, decision: &ActionDecision, context: usize, factor: Factor<'_>, outcome: &Outcome);

    fn ledger(&self) -> &BudgetLedger;

    /// Consumes exactly one uniform draw from `rng`, whatever the state.
    fn step<R: Rng + ?Sized>(&mut self, context: usize, rng: &mut R) -> ActionDecision
    where
        Self: Sized,
    {
        let draw: f64 = rng.random();
        self.decide(context, draw)
    }

    fn is_stopped(&self) -> bool {
        self.ledger().is_stopped()
    }
}

/// Estimator configuration for continuous factor spaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// `None` picks the lowest-order shipped kernel valid for the declared
    /// smoothness.
    pub kernel: Option<KernelSpec>,
    pub bandwidth_constant: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kernel: None,
            bandwidth_constant: 1.0,
        }
    }
}

/// Re-solving with empirical estimation.
#[derive(Debug, Clone)]
pub struct ReSolvingPolicy {
    instance: Arc<ProblemInstance>,
    mode: FeedbackMode,
    ledger: BudgetLedger,
    contexts: DiscreteEstimator,
    factors: FactorEstimator,
    plug_in: PlugIn,
    // per-round scratch
    mass: Vec<f64>,
    estimate: Expectations,
    lp: FluidLp,
    solver: SimplexSolver,
    solution: FluidSolution,
}

impl ReSolvingPolicy {
    pub fn new(instance: Arc<ProblemInstance>, mode: FeedbackMode, config: EstimatorConfig) -> Result<Self> {
        let factors = FactorEstimator::for_instance(&instance, config.kernel, config.bandwidth_constant)?;
        let k = instance.contexts().len();
        let n = instance.resources();
        Ok(Self {
            ledger: BudgetLedger::for_instance(&instance),
            contexts: DiscreteEstimator::new(k),
            plug_in: PlugIn::new(&instance),
            mass: vec![0.0; k],
            estimate: Expectations::zeros(k, n),
            lp: FluidLp::new(vec![0.0; k], vec![vec![0.0; k]; n], vec![0.0; n])?,
            solver: SimplexSolver::default(),
            solution: FluidSolution {
                phi: vec![0.0; k],
                lambda: vec![0.0; n],
                objective: 0.0,
                binding: Vec::new(),
                status: SolveStatus::Optimal,
            },
            factors,
            instance,
            mode,
        })
    }

    pub fn mode(&self) -> FeedbackMode {
        self.mode
    }

    pub fn context_estimator(&self) -> &DiscreteEstimator {
        &self.contexts
    }

    pub fn factor_estimator(&self) -> &FactorEstimator {
        &self.factors
    }

    /// `|I_t|`: number of factor samples observed so far.
    pub fn observed_factors(&self) -> u64 {
        self.factors.samples()
    }

    /// Solution of the most recent solve.
    pub fn last_solution(&self) -> &FluidSolution {
        &self.solution
    }

    /// Solve `Ĵ(ρ_t, H_t)` with the current estimates.
    fn solve(&mut self, rate: &[f64]) -> bool {
        self.contexts.mass_into(&mut self.mass);
        self.plug_in
            .estimate_into(&self.instance, &self.factors, &mut self.estimate);
        if self.lp.refill(&self.mass, &self.estimate, rate).is_err() {
            return false;
        }
        self.solver.solve_into(&self.lp, &mut self.solution);
        self.solution.is_optimal()
    }

    /// A context with zero empirical mass has an all-zero LP column, so its
    /// control is free. Take the limit of vanishing mass instead: serve iff
    /// `R̂(θ) − λ·Ĉ(θ) > 0`.
    fn price_unseen(&self, context: usize) -> f64 {
        let cost: f64 = self
            .solution
            .lambda
            .iter()
            .zip(&self.estimate.consumption)
            .map(|(l, c)| l * c[context])
            .sum();
        if self.estimate.reward[context] - cost > 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

impl Policy for ReSolvingPolicy {
    fn decide(&mut self, context: usize, draw: f64) -> ActionDecision {
        let mut rate = Vec::with_capacity(self.instance.resources());
        self.ledger.rate_into(&mut rate);
        if self.ledger.is_stopped() {
            return ActionDecision::null(rate);
        }
        if !self.solve(&rate) {
            return ActionDecision {
                lp_failed: true,
                ..ActionDecision::null(rate)
            };
        }
        let phi = if self.mass[context] > 0.0 {
            self.solution.phi[context]
        } else {
            self.price_unseen(context)
        };
        ActionDecision {
            action: bernoulli_action(draw, phi),
            phi_at_context: phi,
            rate,
            lp_objective: self.solution.objective,
            lp_failed: false,
        }
    }

    fn observe(&mut self, decision: &ActionDecision, context: usize, factor: Factor<'_>, outcome: &Outcome) {
        self.contexts
            .update(context)
            .expect("context sampled from the instance support");
        if self.mode.reveals(decision.action) {
            self.factors
                .observe(factor)
                .expect("factor sampled from the instance space");
        }
        self.ledger.charge(&outcome.consumption);
    }

    fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }
}

/// Solves `J(ρ)` once with the true distributions and replays `φ*` every
/// round under the same stopping rule.
#[derive(Debug, Clone)]
pub struct StaticFluidPolicy {
    phi: Vec<f64>,
    objective: f64,
    ledger: BudgetLedger,
}

impl StaticFluidPolicy {
    pub fn new(instance: &ProblemInstance) -> Result<Self> {
        let lp = crate::lp::build_fluid_lp(
            instance.contexts().mass(),
            &instance.true_expectations(),
            instance.rho(),
        )?;
        let sol = crate::lp::solve_lp(&lp);
        if !sol.is_optimal() {
            return Err(Error::Numeric("static fluid LP solve broke down".into()));
        }
        Ok(Self {
            phi: sol.phi,
            objective: sol.objective,
            ledger: BudgetLedger::for_instance(instance),
        })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
}

impl Policy for StaticFluidPolicy {
    fn decide(&mut self, context: usize, draw: f64) -> ActionDecision {
        let rate = self.ledger.rate();
        if self.ledger.is_stopped() {
            return ActionDecision::null(rate);
        }
        let phi = self.phi[context];
        ActionDecision {
            action: bernoulli_action(draw, phi),
            phi_at_context: phi,
            rate,
            lp_objective: self.objective,
            lp_failed: false,
        }
    }

    fn observe(&mut self, _decision: &ActionDecision, _context: usize, _factor: Factor<'_>, outcome: &Outcome) {
        self.ledger.charge(&outcome.consumption);
    }

    fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }
}
