use crate::error::{Error, Result};

/// Frequency estimator over the labels `0..support`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteEstimator {
    counts: Vec<u64>,
    total: u64,
}

impl DiscreteEstimator {
    pub fn new(support: usize) -> Self {
        Self {
            counts: vec![0; support],
            total: 0,
        }
    }

    pub fn update(&mut self, label: usize) -> Result<()> {
        let support = self.counts.len();
        let slot = self.counts.get_mut(label).ok_or_else(|| {
            Error::Domain(format!("label {label} outside support of size {support}"))
        })?;
        *slot += 1;
        self.total += 1;
        Ok(())
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn samples(&self) -> u64 {
        self.total
    }

    pub fn support(&self) -> usize {
        self.counts.len()
    }

    /// `counts / m`, or uniform over the support when no samples exist yet.
    pub fn mass(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.counts.len()];
        self.mass_into(&mut out);
        out
    }

    pub fn mass_into(&self, out: &mut [f64]) {
        if self.total == 0 {
            let uniform = 1.0 / self.counts.len() as f64;
            out.iter_mut().for_each(|p| *p = uniform);
        } else {
            let m = self.total as f64;
            for (p, &c) in out.iter_mut().zip(&self.counts) {
                *p = c as f64 / m;
            }
        }
    }
}

/// `sqrt(2 ln((2^a − 2)/ε) / m)`: with probability at least `1 − ε` the L1
/// error of the empirical mass over `m` samples of an `a`-atom distribution
/// stays below this value.
///
/// `ln(2^a − 2)` is evaluated as `a ln 2 + ln(1 − 2^{1−a})`, which never
/// overflows.
pub fn weissman_threshold(support: u32, samples: u64, epsilon: f64) -> Result<f64> {
    if support < 2 {
        return Err(Error::param("support", "need at least 2 atoms"));
    }
    if samples == 0 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", format!("{epsilon} not in (0, 1)")));
    }
    let a = support as f64;
    let ln_atoms = a * std::f64::consts::LN_2 + (-(2f64).powf(1.0 - a)).ln_1p();
    Ok((2.0 * (ln_atoms - epsilon.ln()) / samples as f64).sqrt())
}
