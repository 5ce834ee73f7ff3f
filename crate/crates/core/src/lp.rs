//! Finite-context fluid linear program
//!
//! ```text
//! max  Σ_θ w(θ) φ(θ)
//! s.t. Σ_θ A[i][θ] φ(θ) <= κ_i    for every resource i
//!      0 <= φ(θ) <= 1
//! ```
//!
//! with `w(θ) = u(θ) R(θ)` and `A[i][θ] = u(θ) C^i(θ)`, solved by a dense
//! bounded-variable primal simplex using Bland's smallest-index rule.

use crate::error::{Error, Result};
use crate::model::Expectations;

/// Slack below which a resource constraint counts as binding.
pub const BINDING_TOL: f64 = 1e-7;

const PRIMAL_FEAS_TOL: f64 = 1e-9;
const REDUCED_COST_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct FluidLp {
    objective: Vec<f64>,
    constraints: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl FluidLp {
    /// Coefficients must be finite and nonnegative, `rhs` nonnegative.
    pub fn new(objective: Vec<f64>, constraints: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        let k = objective.len();
        if constraints.len() != rhs.len() {
            return Err(Error::Dimension(format!(
                "{} constraint rows but {} right-hand sides",
                constraints.len(),
                rhs.len()
            )));
        }
        if let Some(row) = constraints.iter().find(|r| r.len() != k) {
            return Err(Error::Dimension(format!(
                "constraint row of length {}, expected {k}",
                row.len()
            )));
        }
        let nonneg = |v: &f64| *v >= 0.0 && v.is_finite();
        if !objective.iter().all(nonneg) || !constraints.iter().flatten().all(nonneg) {
            return Err(Error::param("lp", "coefficients must be finite and nonnegative"));
        }
        if !rhs.iter().all(nonneg) {
            return Err(Error::param("kappa", "right-hand side must be finite and nonnegative"));
        }
        Ok(Self {
            objective,
            constraints,
            rhs,
        })
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Vec<f64>] {
        &self.constraints
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    /// Reassemble in place from new plug-ins, keeping allocations.
    pub fn refill(&mut self, mass: &[f64], est: &Expectations, kappa: &[f64]) -> Result<()> {
        check_fluid_dims(mass, est, kappa)?;
        if let Some(k) = kappa.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(Error::param("kappa", format!("entry {k} is negative or not finite")));
        }
        let contexts = mass.len();
        self.objective.resize(contexts, 0.0);
        for ((w, &u), &r) in self.objective.iter_mut().zip(mass).zip(&est.reward) {
            *w = u * r;
        }
        self.constraints.resize_with(kappa.len(), Vec::new);
        for (row, cons) in self.constraints.iter_mut().zip(&est.consumption) {
            row.resize(contexts, 0.0);
            for ((a, &u), &c) in row.iter_mut().zip(mass).zip(cons) {
                *a = u * c;
            }
        }
        self.rhs.clear();
        self.rhs.extend_from_slice(kappa);
        Ok(())
    }

    /// `A φ`.
    pub fn activity(&self, phi: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|row| row.iter().zip(phi).map(|(a, x)| a * x).sum())
            .collect()
    }

    pub fn value(&self, phi: &[f64]) -> f64 {
        self.objective.iter().zip(phi).map(|(w, x)| w * x).sum()
    }

    /// Objective of the dual `min κ·λ + Σ_θ max(0, w(θ) − λ·A(θ))`.
    pub fn dual_value(&self, lambda: &[f64]) -> f64 {
        let box_part: f64 = (0..self.variables())
            .map(|j| {
                let priced: f64 = self
                    .constraints
                    .iter()
                    .zip(lambda)
                    .map(|(row, l)| row[j] * l)
                    .sum();
                (self.objective[j] - priced).max(0.0)
            })
            .sum();
        box_part + self.rhs.iter().zip(lambda).map(|(k, l)| k * l).sum::<f64>()
    }
}

fn check_fluid_dims(mass: &[f64], est: &Expectations, kappa: &[f64]) -> Result<()> {
    if est.reward.len() != mass.len() {
        return Err(Error::Dimension(format!(
            "{} context masses but {} reward estimates",
            mass.len(),
            est.reward.len()
        )));
    }
    if est.consumption.len() != kappa.len() {
        return Err(Error::Dimension(format!(
            "{} consumption rows but {} budget rates",
            est.consumption.len(),
            kappa.len()
        )));
    }
    if est.consumption.iter().any(|row| row.len() != mass.len()) {
        return Err(Error::Dimension("consumption row length differs from context count".into()));
    }
    Ok(())
}

/// Assemble `Ĵ(κ)` from a context mass vector and plug-in expectations.
pub fn build_fluid_lp(mass: &[f64], est: &Expectations, kappa: &[f64]) -> Result<FluidLp> {
    let mut lp = FluidLp {
        objective: Vec::new(),
        constraints: Vec::new(),
        rhs: Vec::new(),
    };
    lp.refill(mass, est, kappa)?;
    FluidLp::new(lp.objective, lp.constraints, lp.rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    NumericFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidSolution {
    pub phi: Vec<f64>,
    /// Basis duals of the resource constraints. Not unique at degenerate
    /// vertices.
    pub lambda: Vec<f64>,
    pub objective: f64,
    pub binding: Vec<usize>,
    pub status: SolveStatus,
}

impl FluidSolution {
    fn failed(k: usize, n: usize) -> Self {
        Self {
            phi: vec![0.0; k],
            lambda: vec![0.0; n],
            objective: 0.0,
            binding: Vec::new(),
            status: SolveStatus::NumericFailure,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Resource indices whose slack `κ_i − (Aφ)_i` is at most `tol`.
pub fn binding_constraints(phi: &[f64], kappa: &[f64], a: &[Vec<f64>], tol: f64) -> Vec<usize> {
    a.iter()
        .zip(kappa)
        .enumerate()
        .filter(|(_, (row, &k))| {
            let used: f64 = row.iter().zip(phi).map(|(c, x)| c * x).sum();
            k - used <= tol
        })
        .map(|(i, _)| i)
        .collect()
}

pub fn solve_lp(lp: &FluidLp) -> FluidSolution {
    let mut solver = SimplexSolver::default();
    let mut sol = FluidSolution::failed(lp.variables(), lp.rows());
    solver.solve_into(lp, &mut sol);
    sol
}

/// Reusable scratch space for repeated solves of same-shaped programs.
///
/// Columns `0..k` are the structural variables (bounds `[0, 1]`), columns
/// `k..k+n` the slacks (bounds `[0, ∞)`). The initial all-slack basis at
/// `φ = 0` is feasible because `κ >= 0`.
#[derive(Debug, Default, Clone)]
pub struct SimplexSolver {
    tableau: Vec<f64>,
    basic_values: Vec<f64>,
    reduced: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    // dense system scratch for the final basis refinement
    system: Vec<f64>,
    system_rhs: Vec<f64>,
}

impl SimplexSolver {
    pub fn solve_into(&mut self, lp: &FluidLp, out: &mut FluidSolution) {
        let k = lp.variables();
        let n = lp.rows();
        out.phi.resize(k, 0.0);
        out.lambda.resize(n, 0.0);
        out.binding.clear();
        if self.run(lp) && self.extract(lp, out) {
            out.status = SolveStatus::Optimal;
        } else {
            *out = FluidSolution::failed(k, n);
        }
    }

    fn run(&mut self, lp: &FluidLp) -> bool {
        let k = lp.variables();
        let n = lp.rows();
        let cols = k + n;
        self.tableau.clear();
        self.tableau.resize(n * cols, 0.0);
        for (i, row) in lp.constraints.iter().enumerate() {
            self.tableau[i * cols..i * cols + k].copy_from_slice(row);
            self.tableau[i * cols + k + i] = 1.0;
        }
        self.basic_values.clear();
        self.basic_values.extend_from_slice(&lp.rhs);
        self.reduced.clear();
        self.reduced.extend_from_slice(&lp.objective);
        self.reduced.resize(cols, 0.0);
        self.basis.clear();
        self.basis.extend(k..cols);
        self.is_basic.clear();
        self.is_basic.resize(cols, false);
        for b in k..cols {
            self.is_basic[b] = true;
        }
        self.at_upper.clear();
        self.at_upper.resize(cols, false);

        let upper = |j: usize| if j < k { 1.0 } else { f64::INFINITY };
        let max_iter = 50 * (cols + 1) * (n + 1);

        for _ in 0..max_iter {
            // Bland: smallest improving index
            let entering = (0..cols).find(|&j| {
                !self.is_basic[j]
                    && ((!self.at_upper[j] && self.reduced[j] > REDUCED_COST_TOL)
                        || (self.at_upper[j] && self.reduced[j] < -REDUCED_COST_TOL))
            });
            let Some(q) = entering else {
                return true;
            };
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };

            // ratio test; ties go to the smallest basic variable index
            let mut step = upper(q);
            let mut leave: Option<(usize, bool)> = None;
            for r in 0..n {
                let alpha = dir * self.tableau[r * cols + q];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[r];
                let (ratio, to_upper) = if alpha > 0.0 {
                    (self.basic_values[r] / alpha, false)
                } else {
                    let ub = upper(b);
                    if ub.is_infinite() {
                        continue;
                    }
                    ((ub - self.basic_values[r]) / -alpha, true)
                };
                let ratio = ratio.max(0.0);
                let better = match leave {
                    None => ratio < step,
                    Some((lr, _)) => {
                        ratio < step || (ratio == step && b < self.basis[lr])
                    }
                };
                if better {
                    step = ratio;
                    leave = Some((r, to_upper));
                }
            }
            if step.is_infinite() {
                return false;
            }

            for r in 0..n {
                self.basic_values[r] -= dir * step * self.tableau[r * cols + q];
            }
            match leave {
                None => {
                    // bound flip, basis unchanged
                    self.at_upper[q] = !self.at_upper[q];
                }
                Some((r, to_upper)) => {
                    let entering_value = if dir > 0.0 { step } else { upper(q) - step };
                    let old = self.basis[r];
                    self.basic_values[r] = entering_value;
                    self.is_basic[old] = false;
                    self.at_upper[old] = to_upper;
                    self.is_basic[q] = true;
                    self.at_upper[q] = false;
                    self.basis[r] = q;
                    self.pivot(r, q, cols, n);
                }
            }
        }
        false
    }

    fn pivot(&mut self, r: usize, q: usize, cols: usize, n: usize) {
        let piv = self.tableau[r * cols + q];
        for j in 0..cols {
            self.tableau[r * cols + j] /= piv;
        }
        for i in 0..n {
            if i == r {
                continue;
            }
            let f = self.tableau[i * cols + q];
            if f != 0.0 {
                for j in 0..cols {
                    self.tableau[i * cols + j] -= f * self.tableau[r * cols + j];
                }
                self.tableau[i * cols + q] = 0.0;
            }
        }
        let f = self.reduced[q];
        for j in 0..cols {
            self.reduced[j] -= f * self.tableau[r * cols + j];
        }
        self.reduced[q] = 0.0;
    }

    /// Recompute primal values and duals of the final basis from the
    /// original data, then check feasibility.
    fn extract(&mut self, lp: &FluidLp, out: &mut FluidSolution) -> bool {
        let k = lp.variables();
        let n = lp.rows();
        let column = |j: usize, i: usize| -> f64 {
            if j < k {
                lp.constraints[i][j]
            } else if j - k == i {
                1.0
            } else {
                0.0
            }
        };

        // B x_B = κ − Σ_{j at upper} A_j
        self.system.clear();
        self.system.resize(n * n, 0.0);
        for i in 0..n {
            for (c, &b) in self.basis.iter().enumerate() {
                self.system[i * n + c] = column(b, i);
            }
        }
        self.system_rhs.clear();
        self.system_rhs.extend((0..n).map(|i| {
            let upper_use: f64 = (0..k)
                .filter(|&j| !self.is_basic[j] && self.at_upper[j])
                .map(|j| lp.constraints[i][j])
                .sum();
            lp.rhs[i] - upper_use
        }));
        if !solve_dense(&mut self.system, &mut self.system_rhs, n) {
            return false;
        }
        for j in 0..k {
            out.phi[j] = if self.is_basic[j] {
                0.0
            } else if self.at_upper[j] {
                1.0
            } else {
                0.0
            };
        }
        for (c, &b) in self.basis.iter().enumerate() {
            if b < k {
                out.phi[b] = self.system_rhs[c];
            }
        }

        // Bᵀ λ = c_B
        self.system.clear();
        self.system.resize(n * n, 0.0);
        for (c, &b) in self.basis.iter().enumerate() {
            for i in 0..n {
                self.system[c * n + i] = column(b, i);
            }
        }
        self.system_rhs.clear();
        self.system_rhs
            .extend(self.basis.iter().map(|&b| if b < k { lp.objective[b] } else { 0.0 }));
        if !solve_dense(&mut self.system, &mut self.system_rhs, n) {
            return false;
        }
        out.lambda.clear();
        out.lambda.extend(self.system_rhs.iter().map(|&l| l.max(0.0)));

        for x in out.phi.iter_mut() {
            if *x < -PRIMAL_FEAS_TOL || *x > 1.0 + PRIMAL_FEAS_TOL || !x.is_finite() {
                return false;
            }
            *x = x.clamp(0.0, 1.0);
        }
        for (row, &kappa) in lp.constraints.iter().zip(&lp.rhs) {
            let used: f64 = row.iter().zip(&out.phi).map(|(a, x)| a * x).sum();
            if used > kappa + PRIMAL_FEAS_TOL {
                return false;
            }
        }
        out.objective = lp.value(&out.phi);
        out.binding = binding_constraints(&out.phi, &lp.rhs, &lp.constraints, BINDING_TOL);
        true
    }
}

/// Gaussian elimination with partial pivoting on a row-major `n × n` system;
/// the solution overwrites `rhs`. Returns false on a vanishing pivot.
fn solve_dense(m: &mut [f64], rhs: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let (p, pmax) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax <= PIVOT_TOL {
            return false;
        }
        if p != col {
            for j in 0..n {
                m.swap(p * n + j, col * n + j);
            }
            rhs.swap(p, col);
        }
        let piv = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / piv;
            if f != 0.0 {
                for j in col..n {
                    m[r * n + j] -= f * m[col * n + j];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|j| m[col * n + j] * rhs[j]).sum();
        rhs[col] = (rhs[col] - s) / m[col * n + col];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn benchmark_lp(kappa: &[f64]) -> FluidLp {
        let inst = presets::benchmark_nondegenerate();
        build_fluid_lp(inst.contexts().mass(), &inst.true_expectations(), kappa).unwrap()
    }

    fn assert_close(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn benchmark_coefficients() {
        let lp = benchmark_lp(&[1.0, 1.0]);
        assert_close(lp.objective(), &[0.3, 0.36, 0.32], 1e-15);
        assert_close(&lp.constraints()[0], &[0.3, 0.6, 0.4], 1e-15);
        assert_close(&lp.constraints()[1], &[0.6, 0.3, 0.4], 1e-15);
    }

    #[test]
    fn nondegenerate_optimum() {
        let lp = benchmark_lp(&[1.0, 1.0]);
        let sol = solve_lp(&lp);
        assert!(sol.is_optimal());
        assert_close(&sol.phi, &[2.0 / 3.0, 2.0 / 3.0, 1.0], 1e-9);
        assert!((sol.objective - 0.76).abs() < 1e-12);
        assert_eq!(sol.binding, vec![0, 1]);
        assert!((lp.dual_value(&sol.lambda) - sol.objective).abs() < 1e-12);
    }

    #[test]
    fn degenerate_optimum() {
        let sol = solve_lp(&benchmark_lp(&[1.0, 1.15]));
        assert!(sol.is_optimal());
        assert_close(&sol.phi, &[1.0, 0.5, 1.0], 1e-9);
        assert!((sol.objective - 0.80).abs() < 1e-12);
    }

    #[test]
    fn loose_budget_is_box_only() {
        let lp = benchmark_lp(&[10.0, 10.0]);
        let sol = solve_lp(&lp);
        assert_close(&sol.phi, &[1.0, 1.0, 1.0], 0.0);
        assert!((sol.objective - 0.98).abs() < 1e-12);
        assert!(sol.binding.is_empty());
        assert_eq!(sol.lambda, vec![0.0, 0.0]);
    }

    #[test]
    fn binding_tolerance_extremes() {
        let lp = benchmark_lp(&[10.0, 10.0]);
        let sol = solve_lp(&lp);
        let all = binding_constraints(&sol.phi, lp.rhs(), lp.constraints(), f64::INFINITY);
        assert_eq!(all, vec![0, 1]);
    }

    #[test]
    fn point_mass_context() {
        let est = Expectations {
            reward: vec![0.5, 0.9, 0.2],
            consumption: vec![vec![0.4, 0.1, 0.3]],
        };
        let lp = build_fluid_lp(&[1.0, 0.0, 0.0], &est, &[0.2]).unwrap();
        assert_eq!(lp.objective(), &[0.5, 0.0, 0.0]);
        let sol = solve_lp(&lp);
        assert!((sol.phi[0] - 0.5).abs() < 1e-12);
        assert!((sol.objective - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_forces_zero_consumption() {
        let est = Expectations {
            reward: vec![1.0, 1.0],
            consumption: vec![vec![0.5, 0.0]],
        };
        let sol = solve_lp(&build_fluid_lp(&[0.5, 0.5], &est, &[0.0]).unwrap());
        assert!(sol.is_optimal());
        assert_close(&sol.phi, &[0.0, 1.0], 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let est = Expectations::zeros(3, 2);
        assert!(matches!(
            build_fluid_lp(&[0.5, 0.5], &est, &[1.0, 1.0]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            build_fluid_lp(&[0.3, 0.3, 0.4], &est, &[1.0]),
            Err(Error::Dimension(_))
        ));
        assert!(build_fluid_lp(&[0.3, 0.3, 0.4], &est, &[1.0, -1.0]).is_err());
    }

    #[test]
    fn solver_reuse_matches_fresh_solve() {
        let mut solver = SimplexSolver::default();
        let mut out = FluidSolution::failed(0, 0);
        for kappa in [[1.0, 1.0], [1.0, 1.15], [0.2, 0.7], [10.0, 0.1]] {
            let lp = benchmark_lp(&kappa);
            solver.solve_into(&lp, &mut out);
            assert_eq!(out, solve_lp(&lp));
        }
    }
}
