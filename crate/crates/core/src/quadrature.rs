//! Fixed tensor-product grids on the unit cube and adaptive 1-D quadrature.

use crate::error::{Error, Result};

/// Default number of nodes per axis for the factor-space grid.
pub const DEFAULT_POINTS_PER_AXIS: usize = 513;

/// Composite Simpson rule on `[0, 1]^dim`, stored as flattened nodes and
/// product weights.
///
/// The node count per axis must be odd (an even number of panels). Simpson is
/// exact for cubics, so expectations of polynomial integrands against
/// polynomial densities come out at rounding level on the default grid.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitCubeGrid {
    dim: usize,
    points_per_axis: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl UnitCubeGrid {
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if points_per_axis < 3 || points_per_axis % 2 == 0 {
            return Err(Error::param(
                "points_per_axis",
                format!("Simpson grid needs an odd count >= 3, got {points_per_axis}"),
            ));
        }
        let total = points_per_axis
            .checked_pow(dim as u32)
            .filter(|&n| n <= 1 << 26)
            .ok_or_else(|| Error::param("points_per_axis", "grid too large"))?;

        let (axis_nodes, axis_weights) = simpson_axis(points_per_axis);
        let mut nodes = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut index = vec![0usize; dim];
        for _ in 0..total {
            let mut w = 1.0;
            for &k in &index {
                nodes.push(axis_nodes[k]);
                w *= axis_weights[k];
            }
            weights.push(w);
            // odometer increment, last axis fastest
            for slot in index.iter_mut().rev() {
                *slot += 1;
                if *slot < points_per_axis {
                    break;
                }
                *slot = 0;
            }
        }
        Ok(Self {
            dim,
            points_per_axis,
            nodes,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    /// `∫ f` over the cube.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.points().map(|(x, w)| w * f(x)).sum()
    }

    /// Quadrature of values already tabulated at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

fn simpson_axis(points: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = points - 1;
    let h = 1.0 / panels as f64;
    let nodes = (0..points).map(|k| k as f64 * h).collect();
    let weights = (0..points)
        .map(|k| {
            let c = if k == 0 || k == panels {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (nodes, weights)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for dim in 1..=2 {
            let grid = UnitCubeGrid::new(dim, 33).unwrap();
            let total: f64 = grid.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn exact_for_cubics() {
        let grid = UnitCubeGrid::new(1, 5).unwrap();
        let got = grid.integrate(|x| x[0].powi(3) - 2.0 * x[0] * x[0] + 1.0);
        assert!((got - (0.25 - 2.0 / 3.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn product_grid_separates() {
        let grid = UnitCubeGrid::new(2, 9).unwrap();
        let got = grid.integrate(|x| x[0] * x[1] * x[1]);
        assert!((got - 1.0 / 6.0).abs() < 1e-14);
        assert_eq!(grid.len(), 81);
        assert_eq!(grid.point(1), &[0.0, 0.125]);
    }

    #[test]
    fn rejects_even_counts() {
        assert!(UnitCubeGrid::new(1, 512).is_err());
        assert!(UnitCubeGrid::new(0, 5).is_err());
    }

    #[test]
    fn adaptive_gaussian_mass() {
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let got = adaptive_simpson(&phi, -12.0, 12.0, 1e-13);
        assert!((got - 1.0).abs() < 1e-10);
    }
}
