#![allow(dead_code)]

use cbwk::model::{ContextSpace, Expectations, FactorSpace, OutcomeModel};
use cbwk::rng::StreamRng;
use cbwk::ProblemInstance;
use rand::Rng;

/// Maximum of `obj·φ` over `{0 ≤ φ ≤ 1, Aφ ≤ rhs}` by enumerating every
/// basic point: each variable sits at 0, at 1, or is free, and the free
/// variables are pinned by an equal number of active rows.
pub fn brute_force_lp(obj: &[f64], a: &[Vec<f64>], rhs: &[f64]) -> f64 {
    let k = obj.len();
    let n = rhs.len();
    let mut best = f64::NEG_INFINITY;
    let states = 3usize.pow(k as u32);
    for code in 0..states {
        // 0 = lower, 1 = upper, 2 = free
        let mut state = vec![0u8; k];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let free: Vec<usize> = (0..k).filter(|&j| state[j] == 2).collect();
        for rows in subsets(n, free.len()) {
            let mut x: Vec<f64> = state.iter().map(|&s| if s == 1 { 1.0 } else { 0.0 }).collect();
            if !free.is_empty() {
                // rows · x = rhs, solved for the free entries
                let mut m: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|&i| {
                        let fixed: f64 = (0..k).filter(|j| state[*j] == 1).map(|j| a[i][j]).sum();
                        let mut row: Vec<f64> = free.iter().map(|&j| a[i][j]).collect();
                        row.push(rhs[i] - fixed);
                        row
                    })
                    .collect();
                match gauss(&mut m) {
                    Some(sol) => {
                        for (&j, v) in free.iter().zip(sol) {
                            x[j] = v;
                        }
                    }
                    None => continue,
                }
            }
            let feasible = x.iter().all(|v| (-1e-10..=1.0 + 1e-10).contains(v))
                && (0..n).all(|i| a[i].iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() <= rhs[i] + 1e-10);
            if feasible {
                best = best.max(obj.iter().zip(&x).map(|(c, v)| c * v).sum());
            }
        }
    }
    best
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == size)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

/// Solves the augmented square system in place; `None` when singular.
fn gauss(m: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let s = m.len();
    for col in 0..s {
        let p = (col..s).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[p][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, p);
        for r in 0..s {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=s {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..s).map(|i| m[i][s] / m[i][i]).collect())
}

pub fn uniform_vec(rng: &mut StreamRng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..=hi)).collect()
}

pub fn simplex_point(rng: &mut StreamRng, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
    // make the sum exactly representable as 1 within validation tolerance
    let rest: f64 = p[..len - 1].iter().sum();
    p[len - 1] = 1.0 - rest;
    p
}

/// Random tabular instance with up to 4 contexts, 3 factor atoms and 3
/// resources, consumption up to `c_max` and rates in `[0.05, 1.5]·c_max`.
pub fn random_instance(rng: &mut StreamRng, horizon: u64) -> ProblemInstance {
    let k = rng.random_range(1..=4);
    let g = rng.random_range(1..=3);
    let n = rng.random_range(1..=3);
    let r_max = rng.random_range(0.5..2.0);
    let c_max = rng.random_range(0.5..3.0);
    let reward = (0..k).map(|_| uniform_vec(rng, g, 0.0, r_max)).collect();
    let consumption = (0..n)
        .map(|_| (0..k).map(|_| uniform_vec(rng, g, 0.0, c_max)).collect())
        .collect();
    let rho = uniform_vec(rng, n, 0.05 * c_max, 1.5 * c_max);
    ProblemInstance::new(
        ContextSpace::finite(simplex_point(rng, k)).unwrap(),
        FactorSpace::finite(simplex_point(rng, g)).unwrap(),
        OutcomeModel::Tabular { reward, consumption },
        rho,
        horizon,
        r_max,
        c_max,
    )
    .unwrap()
}


/// Random fluid LP: up to 4 variables and 3 rows, coefficients in `[0, 1]`,
/// right-hand sides in `[0.1, 2]`.
pub fn random_lp(rng: &mut StreamRng) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let k = rng.random_range(1..=4);
    let n = rng.random_range(1..=3);
    let obj = uniform_vec(rng, k, 0.0, 1.0);
    let a = (0..n).map(|_| uniform_vec(rng, k, 0.0, 1.0)).collect();
    let rhs = uniform_vec(rng, n, 0.1, 2.0);
    (obj, a, rhs)
}

/// Plug-in data with `R̂ > 0` and `Ĉ ∈ [0, 1]`: context mass, estimates and
/// budget rate.
pub fn random_activity_case(rng: &mut StreamRng) -> (Vec<f64>, Expectations, Vec<f64>) {
    let k = rng.random_range(1..=4);
    let n = rng.random_range(1..=3);
    let mass = simplex_point(rng, k);
    let est = Expectations {
        reward: uniform_vec(rng, k, 1e-3, 1.0),
        consumption: (0..n).map(|_| uniform_vec(rng, k, 0.0, 1.0)).collect(),
    };
    let kappa = uniform_vec(rng, n, 0.01, 1.5);
    (mass, est, kappa)
}
