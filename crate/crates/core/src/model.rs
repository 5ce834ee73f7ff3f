//! Problem instances: context and factor spaces, reward/consumption
//! functions, budgets, and the true expectations feeding the fluid benchmark.

use std::sync::Arc;

use rand::Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::lp::{build_fluid_lp, solve_lp, SolveStatus};
use crate::quadrature::{UnitCubeGrid, DEFAULT_POINTS_PER_AXIS};

const MASS_TOL: f64 = 1e-12;

/// Binary action: decline (`Null`) or serve (`Active`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Null,
    Active,
}

impl Action {
    pub fn as_u8(self) -> u8 {
        match self {
            Action::Null => 0,
            Action::Active => 1,
        }
    }

    pub fn is_active(self) -> bool {
        self == Action::Active
    }
}

/// A realized external factor: an index into a finite support or a point in
/// `[0, 1]^l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor<'a> {
    Label(usize),
    Point(&'a [f64]),
}

fn validate_mass(field: &str, mass: &[f64]) -> Result<()> {
    if mass.is_empty() {
        return Err(Error::validation(field, "empty support"));
    }
    if let Some(bad) = mass.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::validation(
            field,
            format!("mass entry {bad} outside [0, 1]"),
        ));
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::validation(
            field,
            format!("mass sums to {total}, expected 1"),
        ));
    }
    Ok(())
}

/// Finite context space. Labels are the indices `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSpace {
    mass: Vec<f64>,
}

impl ContextSpace {
    pub fn finite(mass: Vec<f64>) -> Result<Self> {
        validate_mass("contexts.mass", &mass)?;
        Ok(Self { mass })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
}

/// Smoothness class `Σ(β, L)` declared for a continuous density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderClass {
    pub beta: u32,
    pub lipschitz: f64,
}

/// Sampling densities on `[0, 1]^l`, applied independently per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    Uniform,
    Beta { alpha: f64, beta: f64 },
}

impl Density {
    pub fn pdf(&self, x: &[f64]) -> f64 {
        match *self {
            Density::Uniform => {
                if x.iter().all(|v| (0.0..=1.0).contains(v)) {
                    1.0
                } else {
                    0.0
                }
            }
            Density::Beta { alpha, beta } => {
                let log_norm = statrs::function::beta::ln_beta(alpha, beta);
                x.iter()
                    .map(|&v| {
                        if !(0.0..=1.0).contains(&v) {
                            return 0.0;
                        }
                        let a = if alpha == 1.0 { 1.0 } else { v.powf(alpha - 1.0) };
                        let b = if beta == 1.0 {
                            1.0
                        } else {
                            (1.0 - v).powf(beta - 1.0)
                        };
                        a * b * (-log_norm).exp()
                    })
                    .product()
            }
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            Density::Uniform => out.iter_mut().for_each(|v| *v = rng.random::<f64>()),
            Density::Beta { alpha, beta } => {
                let dist = rand_distr::Beta::new(alpha, beta).expect("validated parameters");
                out.iter_mut().for_each(|v| *v = dist.sample(rng));
            }
        }
    }

    /// Mean of each coordinate.
    pub fn mean(&self) -> f64 {
        match *self {
            Density::Uniform => 0.5,
            Density::Beta { alpha, beta } => alpha / (alpha + beta),
        }
    }
}

/// Continuous external-factor space on `[0, 1]^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousFactor {
    pub density: Density,
    pub smoothness: HolderClass,
    grid: Arc<UnitCubeGrid>,
}

impl ContinuousFactor {
    pub fn new(
        dim: usize,
        density: Density,
        smoothness: HolderClass,
        points_per_axis: usize,
    ) -> Result<Self> {
        if let Density::Beta { alpha, beta } = density {
            // alpha, beta >= 1 keeps the density bounded on the closed cube
            if !(alpha >= 1.0 && beta >= 1.0 && alpha.is_finite() && beta.is_finite()) {
                return Err(Error::validation(
                    "factors.density",
                    format!("beta parameters must be finite and >= 1, got ({alpha}, {beta})"),
                ));
            }
        }
        if smoothness.beta == 0 || !(smoothness.lipschitz > 0.0) {
            return Err(Error::validation(
                "factors.smoothness",
                "need beta >= 1 and L > 0",
            ));
        }
        let grid = UnitCubeGrid::new(dim, points_per_axis)?;
        let mut negative = false;
        let mass = grid.integrate(|x| {
            let p = density.pdf(x);
            negative |= p < 0.0 || !p.is_finite();
            p
        });
        if negative {
            return Err(Error::validation("factors.density", "negative or non-finite on grid"));
        }
        if (mass - 1.0).abs() > 1e-3 {
            return Err(Error::validation(
                "factors.density",
                format!("grid quadrature of density is {mass}, expected 1"),
            ));
        }
        Ok(Self {
            density,
            smoothness,
            grid: Arc::new(grid),
        })
    }

    pub fn with_default_grid(dim: usize, density: Density, smoothness: HolderClass) -> Result<Self> {
        Self::new(dim, density, smoothness, DEFAULT_POINTS_PER_AXIS)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn grid(&self) -> &UnitCubeGrid {
        &self.grid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorSpace {
    Finite { mass: Vec<f64> },
    Continuous(ContinuousFactor),
}

impl FactorSpace {
    pub fn finite(mass: Vec<f64>) -> Result<Self> {
        validate_mass("factors.mass", &mass)?;
        Ok(FactorSpace::Finite { mass })
    }

    /// Number of finite atoms, or the point dimension for continuous spaces.
    pub fn width(&self) -> usize {
        match self {
            FactorSpace::Finite { mass } => mass.len(),
            FactorSpace::Continuous(c) => c.dim(),
        }
    }

    fn check(&self, factor: Factor<'_>) -> Result<()> {
        match (self, factor) {
            (FactorSpace::Finite { mass }, Factor::Label(k)) if k < mass.len() => Ok(()),
            (FactorSpace::Finite { mass }, Factor::Label(k)) => Err(Error::Domain(format!(
                "factor label {k} outside support of size {}",
                mass.len()
            ))),
            (FactorSpace::Continuous(c), Factor::Point(x)) => {
                if x.len() != c.dim() {
                    Err(Error::Domain(format!(
                        "factor point has dimension {}, expected {}",
                        x.len(),
                        c.dim()
                    )))
                } else if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    Err(Error::Domain("factor point outside [0, 1]^l".into()))
                } else {
                    Ok(())
                }
            }
            (FactorSpace::Finite { .. }, Factor::Point(_)) => {
                Err(Error::Domain("point factor given for a finite factor space".into()))
            }
            (FactorSpace::Continuous(_), Factor::Label(_)) => {
                Err(Error::Domain("label factor given for a continuous factor space".into()))
            }
        }
    }
}

/// Reward and consumption of the active action. The null action always
/// yields zero reward and zero consumption.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeModel {
    /// `reward[θ][γ]`, `consumption[i][θ][γ]` over a finite factor support.
    Tabular {
        reward: Vec<Vec<f64>>,
        consumption: Vec<Vec<Vec<f64>>>,
    },
    /// `r(θ, 1, γ) = base[θ] + slope[θ]·γ`, and likewise per resource, for
    /// `γ ∈ [0, 1]^l`.
    Affine {
        reward_base: Vec<f64>,
        reward_slope: Vec<Vec<f64>>,
        consumption_base: Vec<Vec<f64>>,
        consumption_slope: Vec<Vec<Vec<f64>>>,
    },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl OutcomeModel {
    fn resources(&self) -> usize {
        match self {
            OutcomeModel::Tabular { consumption, .. } => consumption.len(),
            OutcomeModel::Affine {
                consumption_base, ..
            } => consumption_base.len(),
        }
    }

    #[inline]
    fn reward(&self, ctx: usize, factor: Factor<'_>) -> f64 {
        match (self, factor) {
            (OutcomeModel::Tabular { reward, .. }, Factor::Label(g)) => reward[ctx][g],
            (
                OutcomeModel::Affine {
                    reward_base,
                    reward_slope,
                    ..
                },
                Factor::Point(x),
            ) => reward_base[ctx] + dot(&reward_slope[ctx], x),
            _ => unreachable!("factor kind checked at construction"),
        }
    }

    #[inline]
    fn consumption_into(&self, ctx: usize, factor: Factor<'_>, out: &mut [f64]) {
        match (self, factor) {
            (OutcomeModel::Tabular { consumption, .. }, Factor::Label(g)) => {
                for (o, table) in out.iter_mut().zip(consumption) {
                    *o = table[ctx][g];
                }
            }
            (
                OutcomeModel::Affine {
                    consumption_base,
                    consumption_slope,
                    ..
                },
                Factor::Point(x),
            ) => {
                for ((o, base), slope) in out.iter_mut().zip(consumption_base).zip(consumption_slope)
                {
                    *o = base[ctx] + dot(&slope[ctx], x);
                }
            }
            _ => unreachable!("factor kind checked at construction"),
        }
    }
}

/// Reward and consumption realized in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub reward: f64,
    pub consumption: Vec<f64>,
}

impl Outcome {
    pub fn zero(resources: usize) -> Self {
        Self {
            reward: 0.0,
            consumption: vec![0.0; resources],
        }
    }
}

/// Per-context expected reward `R(θ)` and consumption `C^i(θ)` of the active
/// action. `consumption` is indexed `[resource][context]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expectations {
    pub reward: Vec<f64>,
    pub consumption: Vec<Vec<f64>>,
}

impl Expectations {
    pub fn zeros(contexts: usize, resources: usize) -> Self {
        Self {
            reward: vec![0.0; contexts],
            consumption: vec![vec![0.0; contexts]; resources],
        }
    }
}

/// Active-action reward and consumption evaluated at every grid node of a
/// continuous factor space. Indexed `[context][node]` and
/// `[resource][context][node]`.
#[derive(Debug, Clone)]
pub struct GridTables {
    pub reward: Vec<Vec<f64>>,
    pub consumption: Vec<Vec<Vec<f64>>>,
}

/// Full environment description. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    contexts: ContextSpace,
    factors: FactorSpace,
    outcome: OutcomeModel,
    rho: Vec<f64>,
    horizon: u64,
    r_max: f64,
    c_max: f64,
}

impl ProblemInstance {
    pub fn new(
        contexts: ContextSpace,
        factors: FactorSpace,
        outcome: OutcomeModel,
        rho: Vec<f64>,
        horizon: u64,
        r_max: f64,
        c_max: f64,
    ) -> Result<Self> {
        let n = rho.len();
        if n == 0 {
            return Err(Error::validation("rho", "need at least one resource"));
        }
        if let Some(r) = rho.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::validation("rho", format!("entry {r} not in (0, inf)")));
        }
        if horizon == 0 {
            return Err(Error::validation("horizon", "must be positive"));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::validation("r_max", "must be positive and finite"));
        }
        if !(c_max > 0.0 && c_max.is_finite()) {
            return Err(Error::validation("c_max", "must be positive and finite"));
        }
        if outcome.resources() != n {
            return Err(Error::Dimension(format!(
                "outcome model has {} resources, rho has {n}",
                outcome.resources()
            )));
        }
        let instance = Self {
            contexts,
            factors,
            outcome,
            rho,
            horizon,
            r_max,
            c_max,
        };
        instance.check_shapes()?;
        instance.check_bounds()?;
        Ok(instance)
    }

    fn check_shapes(&self) -> Result<()> {
        let k = self.contexts.len();
        let dim_err = |what: &str| Err(Error::Dimension(what.to_string()));
        match (&self.outcome, &self.factors) {
            (OutcomeModel::Tabular { reward, consumption }, FactorSpace::Finite { mass }) => {
                let g = mass.len();
                let ok = |m: &Vec<Vec<f64>>| m.len() == k && m.iter().all(|row| row.len() == g);
                if !ok(reward) {
                    return dim_err("reward matrix must be |contexts| x |factors|");
                }
                if !consumption.iter().all(ok) {
                    return dim_err("consumption matrices must be |contexts| x |factors|");
                }
            }
            (
                OutcomeModel::Affine {
                    reward_base,
                    reward_slope,
                    consumption_base,
                    consumption_slope,
                },
                FactorSpace::Continuous(c),
            ) => {
                let l = c.dim();
                let ok_slope = |m: &Vec<Vec<f64>>| m.len() == k && m.iter().all(|row| row.len() == l);
                if reward_base.len() != k || !ok_slope(reward_slope) {
                    return dim_err("affine reward needs |contexts| bases and |contexts| x l slopes");
                }
                if consumption_slope.len() != consumption_base.len()
                    || !consumption_base.iter().all(|b| b.len() == k)
                    || !consumption_slope.iter().all(ok_slope)
                {
                    return dim_err("affine consumption needs per-resource bases and slopes");
                }
            }
            (OutcomeModel::Tabular { .. }, FactorSpace::Continuous(_)) => {
                return Err(Error::validation(
                    "outcome",
                    "tabular outcomes require a finite factor space",
                ))
            }
            (OutcomeModel::Affine { .. }, FactorSpace::Finite { .. }) => {
                return Err(Error::validation(
                    "outcome",
                    "affine outcomes require a continuous factor space",
                ))
            }
        }
        Ok(())
    }

    /// Exhaustive for tabular outcomes; affine outcomes attain their extremes
    /// at cube corners, so checking the corners is exhaustive too.
    fn check_bounds(&self) -> Result<()> {
        let n = self.resources();
        let mut buf = vec![0.0; n];
        let mut check = |factor: Factor<'_>| -> Result<()> {
            for ctx in 0..self.contexts.len() {
                let r = self.outcome.reward(ctx, factor);
                if !(0.0..=self.r_max).contains(&r) {
                    return Err(Error::validation(
                        "reward",
                        format!("value {r} outside [0, r_max = {}]", self.r_max),
                    ));
                }
                self.outcome.consumption_into(ctx, factor, &mut buf);
                if let Some(c) = buf.iter().find(|c| !(0.0..=self.c_max).contains(*c)) {
                    return Err(Error::validation(
                        "consumption",
                        format!("value {c} outside [0, c_max = {}]", self.c_max),
                    ));
                }
            }
            Ok(())
        };
        match &self.factors {
            FactorSpace::Finite { mass } => (0..mass.len()).try_for_each(|g| check(Factor::Label(g))),
            FactorSpace::Continuous(c) => {
                let l = c.dim();
                let mut corner = vec![0.0; l];
                for bits in 0u64..(1u64 << l.min(20)) {
                    for (axis, v) in corner.iter_mut().enumerate() {
                        *v = ((bits >> axis) & 1) as f64;
                    }
                    check(Factor::Point(&corner))?;
                }
                Ok(())
            }
        }
    }

    pub fn contexts(&self) -> &ContextSpace {
        &self.contexts
    }

    pub fn factors(&self) -> &FactorSpace {
        &self.factors
    }

    pub fn outcome_model(&self) -> &OutcomeModel {
        &self.outcome
    }

    pub fn resources(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Same instance with a different horizon `T`.
    pub fn with_horizon(&self, horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::validation("horizon", "must be positive"));
        }
        Ok(Self {
            horizon,
            ..self.clone()
        })
    }

    /// Same instance with different budget rates.
    pub fn with_rho(&self, rho: Vec<f64>) -> Result<Self> {
        Self::new(
            self.contexts.clone(),
            self.factors.clone(),
            self.outcome.clone(),
            rho,
            self.horizon,
            self.r_max,
            self.c_max,
        )
    }

    pub fn evaluate_outcome(&self, ctx: usize, action: Action, factor: Factor<'_>) -> Result<Outcome> {
        if ctx >= self.contexts.len() {
            return Err(Error::Domain(format!(
                "context label {ctx} outside support of size {}",
                self.contexts.len()
            )));
        }
        self.factors.check(factor)?;
        let mut consumption = vec![0.0; self.resources()];
        let reward = self.evaluate_into(ctx, action, factor, &mut consumption);
        Ok(Outcome {
            reward,
            consumption,
        })
    }

    /// Unchecked evaluation writing the consumption into `out`; returns the
    /// reward. Labels must already be in range.
    #[inline]
    pub fn evaluate_into(&self, ctx: usize, action: Action, factor: Factor<'_>, out: &mut [f64]) -> f64 {
        match action {
            Action::Null => {
                out.iter_mut().for_each(|c| *c = 0.0);
                0.0
            }
            Action::Active => {
                self.outcome.consumption_into(ctx, factor, out);
                self.outcome.reward(ctx, factor)
            }
        }
    }

    /// Outcome functions at every grid node; `None` for finite factor spaces.
    pub fn grid_tables(&self) -> Option<GridTables> {
        let FactorSpace::Continuous(c) = &self.factors else {
            return None;
        };
        let k = self.contexts.len();
        let n = self.resources();
        let grid = c.grid();
        let mut reward = vec![Vec::with_capacity(grid.len()); k];
        let mut consumption = vec![vec![Vec::with_capacity(grid.len()); k]; n];
        let mut buf = vec![0.0; n];
        for (x, _) in grid.points() {
            for ctx in 0..k {
                reward[ctx].push(self.outcome.reward(ctx, Factor::Point(x)));
                self.outcome.consumption_into(ctx, Factor::Point(x), &mut buf);
                for (i, &v) in buf.iter().enumerate() {
                    consumption[i][ctx].push(v);
                }
            }
        }
        Some(GridTables {
            reward,
            consumption,
        })
    }

    /// `R(θ) = E_γ[r(θ, 1, γ)]` and `C(θ) = E_γ[c(θ, 1, γ)]` under the true
    /// factor distribution: an exact weighted sum for finite spaces, grid
    /// quadrature for continuous ones.
    pub fn true_expectations(&self) -> Expectations {
        let k = self.contexts.len();
        let n = self.resources();
        let mut out = Expectations::zeros(k, n);
        let mut buf = vec![0.0; n];
        let mut accumulate = |factor: Factor<'_>, w: f64| {
            for ctx in 0..k {
                out.reward[ctx] += w * self.outcome.reward(ctx, factor);
                self.outcome.consumption_into(ctx, factor, &mut buf);
                for (i, &v) in buf.iter().enumerate() {
                    out.consumption[i][ctx] += w * v;
                }
            }
        };
        match &self.factors {
            FactorSpace::Finite { mass } => {
                for (g, &w) in mass.iter().enumerate() {
                    accumulate(Factor::Label(g), w);
                }
            }
            FactorSpace::Continuous(c) => {
                for (x, w) in c.grid().points() {
                    accumulate(Factor::Point(x), w * c.density.pdf(x));
                }
            }
        }
        out
    }

    /// Fluid benchmark `T · J(ρ)` with the true distributions.
    pub fn fluid_value(&self) -> Result<f64> {
        Ok(self.horizon as f64 * self.fluid_rate_value(&self.rho)?)
    }

    /// `J(κ)` with the true distributions.
    pub fn fluid_rate_value(&self, kappa: &[f64]) -> Result<f64> {
        let lp = build_fluid_lp(self.contexts.mass(), &self.true_expectations(), kappa)?;
        let sol = solve_lp(&lp);
        match sol.status {
            SolveStatus::Optimal => Ok(sol.objective),
            SolveStatus::NumericFailure => {
                Err(Error::Numeric("fluid LP solve broke down".into()))
            }
        }
    }
}
