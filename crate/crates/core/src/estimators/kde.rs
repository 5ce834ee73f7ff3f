use crate::error::{Error, Result};
use crate::quadrature::UnitCubeGrid;

use super::kernel::{validate_kernel, KernelSpec};

/// `h = c_h · m^{-1/(2β + d)}`.
pub fn default_bandwidth(samples: u64, beta: u32, dim: usize, constant: f64) -> Result<f64> {
    if samples < 2 {
        return Err(Error::param("samples", "bandwidth needs at least 2 samples"));
    }
    if beta == 0 || dim == 0 {
        return Err(Error::param("beta", "smoothness and dimension must be positive"));
    }
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(Error::param("bandwidth_constant", "must be positive and finite"));
    }
    let exponent = -1.0 / (2.0 * beta as f64 + dim as f64);
    Ok(constant * (samples as f64).powf(exponent))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthRule {
    pub beta: u32,
    pub constant: f64,
}

impl BandwidthRule {
    pub fn new(beta: u32, constant: f64) -> Self {
        Self { beta, constant }
    }
}

/// Raw kernel density value. `cold_start` marks the empty-sample fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeValue {
    pub value: f64,
    pub cold_start: bool,
}

/// Radial kernel density estimator over samples in `[0, 1]^dim`:
/// `p̂(x) = (1/m) Σ_i h^{-d} K(‖x − X_i‖₂ / h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeEstimator {
    dim: usize,
    samples: Vec<f64>,
    kernel: KernelSpec,
    rule: BandwidthRule,
}

impl KdeEstimator {
    /// Fails if the kernel does not meet the moment conditions for the
    /// rule's smoothness.
    pub fn new(dim: usize, kernel: KernelSpec, rule: BandwidthRule) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        let report = validate_kernel(&kernel, rule.beta);
        if !report.passed() {
            let failed: Vec<_> = report.failures().map(|c| c.condition.clone()).collect();
            return Err(Error::param(
                "kernel",
                format!("{} fails for beta = {}: {}", kernel.name, rule.beta, failed.join("; ")),
            ));
        }
        // validates the constant up front
        default_bandwidth(2, rule.beta, dim, rule.constant)?;
        Ok(Self {
            dim,
            samples: Vec::new(),
            kernel,
            rule,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> u64 {
        (self.samples.len() / self.dim) as u64
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn rule(&self) -> BandwidthRule {
        self.rule
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::Domain(format!(
                "sample of dimension {}, expected {}",
                point.len(),
                self.dim
            )));
        }
        if point.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain("sample outside [0, 1]^d".into()));
        }
        self.samples.extend_from_slice(point);
        Ok(())
    }

    /// Bandwidth from the rule at the current sample count; `None` below two
    /// samples.
    pub fn bandwidth(&self) -> Option<f64> {
        default_bandwidth(self.samples(), self.rule.beta, self.dim, self.rule.constant).ok()
    }

    pub fn density(&self, x: &[f64], h: f64) -> Result<KdeValue> {
        if x.len() != self.dim {
            return Err(Error::Domain(format!(
                "query of dimension {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::param("bandwidth", format!("{h} must be positive")));
        }
        if self.samples.is_empty() {
            return Ok(KdeValue {
                value: 1.0,
                cold_start: true,
            });
        }
        Ok(KdeValue {
            value: self.raw_density(x, h),
            cold_start: false,
        })
    }

    fn raw_density(&self, x: &[f64], h: f64) -> f64 {
        let cutoff = self.kernel.radius.map(|r| (r * h) * (r * h));
        let inv_h = 1.0 / h;
        let mut acc = 0.0;
        for sample in self.samples.chunks_exact(self.dim) {
            let d2: f64 = sample.iter().zip(x).map(|(s, q)| (s - q) * (s - q)).sum();
            if cutoff.is_some_and(|c| d2 > c) {
                continue;
            }
            acc += self.kernel.eval(d2.sqrt() * inv_h);
        }
        acc / (self.samples() as f64 * h.powi(self.dim as i32))
    }

    /// Normalized quadrature weights `w_k p̂(x_k) / Σ_j w_j p̂(x_j)` over the
    /// grid, with the density clamped at zero first. Uniform (plain grid
    /// weights) below two samples or when the clamped density has no mass.
    pub fn grid_weights_into(&self, grid: &UnitCubeGrid, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(grid.weights());
        let Some(h) = self.bandwidth() else {
            return;
        };
        let mut total = 0.0;
        for (k, w) in out.iter_mut().enumerate() {
            *w *= self.raw_density(grid.point(k), h).max(0.0);
            total += *w;
        }
        if total > 0.0 && total.is_finite() {
            out.iter_mut().for_each(|w| *w /= total);
        } else {
            out.clear();
            out.extend_from_slice(grid.weights());
        }
    }

    /// Clamped, grid-renormalized density values at the grid nodes.
    pub fn grid_density(&self, grid: &UnitCubeGrid) -> Vec<f64> {
        let mut w = Vec::new();
        self.grid_weights_into(grid, &mut w);
        w.iter().zip(grid.weights()).map(|(a, b)| a / b).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(kernel: KernelSpec) -> KdeEstimator {
        KdeEstimator::new(1, kernel, BandwidthRule::new(1, 1.0)).unwrap()
    }

    #[test]
    fn bandwidth_formula() {
        let h = default_bandwidth(1000, 2, 1, 1.0).unwrap();
        assert!((h - 0.251_188_643_150_958).abs() < 1e-12);
        let h2 = default_bandwidth(1000, 2, 1, 2.0).unwrap();
        assert_eq!(h2, 2.0 * h);
        assert!(default_bandwidth(1, 2, 1, 1.0).is_err());
    }

    #[test]
    fn single_sample_at_query() {
        let mut e = est(KernelSpec::gaussian());
        e.push(&[0.3]).unwrap();
        for h in [0.05, 0.5, 2.0] {
            let v = e.density(&[0.3], h).unwrap();
            assert!(!v.cold_start);
            assert!((v.value - KernelSpec::gaussian().eval(0.0) / h).abs() < 1e-14);
        }
    }

    #[test]
    fn cold_start_density() {
        let e = est(KernelSpec::gaussian());
        assert_eq!(
            e.density(&[0.5], 0.1).unwrap(),
            KdeValue {
                value: 1.0,
                cold_start: true
            }
        );
    }

    #[test]
    fn far_sample_outside_compact_support() {
        let mut e = est(KernelSpec::epanechnikov());
        e.push(&[0.2]).unwrap();
        e.push(&[0.8]).unwrap();
        let h = 0.5; // radius 1 < 0.6 / h
        let v = e.density(&[0.2], h).unwrap().value;
        assert!((v - 0.75 / (2.0 * h)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let mut e = est(KernelSpec::gaussian());
        assert!(e.push(&[1.5]).is_err());
        assert!(e.push(&[0.5, 0.5]).is_err());
        assert!(e.density(&[0.5], 0.0).is_err());
        assert!(KdeEstimator::new(1, KernelSpec::gaussian(), BandwidthRule::new(2, 1.0)).is_err());
    }

    #[test]
    fn renormalized_grid_density_integrates_to_one() {
        let grid = UnitCubeGrid::new(1, 129).unwrap();
        let mut e = KdeEstimator::new(1, KernelSpec::gaussian_order4(), BandwidthRule::new(2, 1.0)).unwrap();
        for x in [0.1, 0.15, 0.5, 0.52, 0.9] {
            e.push(&[x]).unwrap();
        }
        let dens = e.grid_density(&grid);
        assert!(dens.iter().all(|d| *d >= 0.0));
        let total = grid.integrate_values(&dens);
        assert!((total - 1.0).abs() < 1e-12);
    }
}
