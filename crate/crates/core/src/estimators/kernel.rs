use std::f64::consts::PI;
use std::fmt;

use crate::quadrature::adaptive_simpson;

/// Integration range used for kernels with unbounded support.
const UNBOUNDED_RANGE: f64 = 12.0;
const MOMENT_TOL: f64 = 1e-6;
const QUAD_TOL: f64 = 1e-12;

/// One-dimensional kernel. `order` is the largest `s` such that every moment
/// `∫ x^j K` with `1 <= j <= s` vanishes.
#[derive(Clone, Copy)]
pub struct KernelSpec {
    pub name: &'static str,
    pub eval: fn(f64) -> f64,
    pub order: u32,
    /// `K` vanishes outside `[-radius, radius]`; `None` for unbounded support.
    pub radius: Option<f64>,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("radius", &self.radius)
            .finish()
    }
}

impl PartialEq for KernelSpec {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

fn gaussian(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn gaussian_order4(x: f64) -> f64 {
    0.5 * (3.0 - x * x) * gaussian(x)
}

fn epanechnikov(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        0.75 * (1.0 - x * x)
    } else {
        0.0
    }
}

fn epanechnikov_order4(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        let x2 = x * x;
        15.0 / 32.0 * (3.0 - 10.0 * x2 + 7.0 * x2 * x2)
    } else {
        0.0
    }
}

impl KernelSpec {
    /// Standard normal bell; second-order, valid for `β = 1`.
    pub fn gaussian() -> Self {
        Self {
            name: "gaussian",
            eval: gaussian,
            order: 1,
            radius: None,
        }
    }

    /// `(3 − x²)/2 · φ(x)`; fourth-order, valid for `β <= 3`.
    pub fn gaussian_order4() -> Self {
        Self {
            name: "gaussian4",
            eval: gaussian_order4,
            order: 3,
            radius: None,
        }
    }

    pub fn epanechnikov() -> Self {
        Self {
            name: "epanechnikov",
            eval: epanechnikov,
            order: 1,
            radius: Some(1.0),
        }
    }

    /// `15/32 (3 − 10x² + 7x⁴)` on `[-1, 1]`; fourth-order.
    pub fn epanechnikov_order4() -> Self {
        Self {
            name: "epanechnikov4",
            eval: epanechnikov_order4,
            order: 3,
            radius: Some(1.0),
        }
    }

    pub fn all() -> [Self; 4] {
        [
            Self::gaussian(),
            Self::gaussian_order4(),
            Self::epanechnikov(),
            Self::epanechnikov_order4(),
        ]
    }

    pub fn by_name(name: &str) -> Option<Self> {
        Self::all().into_iter().find(|k| k.name == name)
    }

    /// Lowest-order shipped kernel whose vanishing moments cover `β`.
    pub fn default_for(beta: u32) -> Option<Self> {
        [Self::gaussian(), Self::gaussian_order4()]
            .into_iter()
            .find(|k| k.order >= beta)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    fn range(&self) -> f64 {
        self.radius.unwrap_or(UNBOUNDED_RANGE)
    }

    /// `∫ g(x) K(x) dx` over the support (or the truncated range), split at
    /// 0 so polynomial pieces integrate exactly.
    fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        let f = |x: f64| g(x) * self.eval(x);
        let r = self.range();
        adaptive_simpson(&f, -r, 0.0, QUAD_TOL) + adaptive_simpson(&f, 0.0, r, QUAD_TOL)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheck {
    pub condition: String,
    pub value: f64,
    pub target: f64,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub kernel: &'static str,
    pub beta: u32,
    pub checks: Vec<KernelCheck>,
}

impl KernelReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &KernelCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Numerically check the kernel conditions for smoothness `β`:
/// unit mass, vanishing moments `1..=β`, and a finite absolute `β`-th
/// moment (judged by its tail contribution beyond the integration range).
pub fn validate_kernel(kernel: &KernelSpec, beta: u32) -> KernelReport {
    let r = kernel.range();
    let mut checks = Vec::with_capacity(beta as usize + 2);
    let mut push = |condition: String, value: f64, target: f64| {
        let residual = (value - target).abs();
        checks.push(KernelCheck {
            condition,
            value,
            target,
            residual,
            passed: residual <= MOMENT_TOL && value.is_finite(),
        });
    };

    push("integral K = 1".into(), kernel.integrate(|_| 1.0), 1.0);
    for s in 1..=beta {
        let m = kernel.integrate(|x| x.powi(s as i32));
        push(format!("integral x^{s} K = 0"), m, 0.0);
    }

    let abs_moment = |x: f64| x.abs().powi(beta as i32) * kernel.eval(x).abs();
    let inner = adaptive_simpson(&abs_moment, -r, 0.0, QUAD_TOL)
        + adaptive_simpson(&abs_moment, 0.0, r, QUAD_TOL);
    let tail = if kernel.radius.is_some() {
        0.0
    } else {
        2.0 * (adaptive_simpson(&abs_moment, r, 2.0 * r, QUAD_TOL)
            + adaptive_simpson(&abs_moment, 2.0 * r, 8.0 * r, QUAD_TOL))
    };
    checks.push(KernelCheck {
        condition: format!("integral |x|^{beta} |K| finite"),
        value: inner + tail,
        target: inner,
        residual: tail,
        passed: inner.is_finite() && tail <= MOMENT_TOL,
    });

    KernelReport {
        kernel: kernel.name,
        beta,
        checks,
    }
}
