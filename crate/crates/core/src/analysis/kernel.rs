use itertools::Itertools;
use nalgebra::DMatrix;

use crate::dist::{binomial, ln_binomial, ExplicitDistribution, KSubset, ENUMERATION_GUARD};
use crate::{Error, Result};

/// Exact one-step kernel of a chain over the support of an explicit
/// distribution: `support[i]` labels row/column `i` of the row-stochastic
/// matrix.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    support: Vec<KSubset>,
    p: DMatrix<f64>,
}

impl TransitionMatrix {
    fn validated(support: Vec<KSubset>, p: DMatrix<f64>) -> Result<Self> {
        for r in 0..p.nrows() {
            let row_sum: f64 = p.row(r).iter().sum();
            if (row_sum - 1.0).abs() > 1e-10 {
                return Err(Error::ContractViolation(format!(
                    "row {r} sums to {row_sum}, not 1"
                )));
            }
            if p.row(r).iter().any(|&v| v < 0.0) {
                return Err(Error::ContractViolation(format!(
                    "negative entry in row {r}"
                )));
            }
        }
        Ok(TransitionMatrix { support, p })
    }

    pub fn support(&self) -> &[KSubset] {
        &self.support
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn index_of(&self, s: &KSubset) -> Option<usize> {
        self.support.binary_search(s).ok()
    }

    /// Smallest matrix entry; > 0 means irreducible and aperiodic.
    pub fn min_entry(&self) -> f64 {
        self.p.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    // mu as a vector aligned with the support; errors if mu lives on
    // different sets.
    fn aligned(&self, mu: &ExplicitDistribution) -> Result<Vec<f64>> {
        let v: Vec<f64> = self.support.iter().map(|s| mu.prob(s)).collect();
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::DimensionMismatch(
                "distribution support differs from kernel support".to_string(),
            ));
        }
        Ok(v)
    }

    /// `‖muᵀP − muᵀ‖₁`, the stationarity defect.
    pub fn stationary_gap(&self, mu: &ExplicitDistribution) -> Result<f64> {
        let v = self.aligned(mu)?;
        let mut gap = 0.0;
        for c in 0..self.p.ncols() {
            let out: f64 = (0..self.p.nrows()).map(|r| v[r] * self.p[(r, c)]).sum();
            gap += (out - v[c]).abs();
        }
        Ok(gap)
    }

    /// `min_{S0,S} P(S0,S)/mu(S)` — the one-step domination ratio.
    pub fn min_ratio(&self, mu: &ExplicitDistribution) -> Result<f64> {
        let v = self.aligned(mu)?;
        let mut min = f64::INFINITY;
        for r in 0..self.p.nrows() {
            for c in 0..self.p.ncols() {
                min = min.min(self.p[(r, c)] / v[c]);
            }
        }
        Ok(min)
    }

    /// `max_{S0} ‖P(S0,·) − mu‖_TV`.
    pub fn max_row_tv(&self, mu: &ExplicitDistribution) -> Result<f64> {
        let v = self.aligned(mu)?;
        let mut worst: f64 = 0.0;
        for r in 0..self.p.nrows() {
            let tv: f64 = (0..self.p.ncols())
                .map(|c| (self.p[(r, c)] - v[c]).abs())
                .sum::<f64>()
                / 2.0;
            worst = worst.max(tv);
        }
        Ok(worst)
    }

    /// The m-step kernel `P^m`.
    pub fn powered(&self, m: u32) -> TransitionMatrix {
        let dim = self.p.nrows();
        let mut acc = DMatrix::<f64>::identity(dim, dim);
        for _ in 0..m {
            acc *= &self.p;
        }
        TransitionMatrix {
            support: self.support.clone(),
            p: acc,
        }
    }

    /// `max_{S0} ‖P^m(S0,·) − mu‖_TV`.
    pub fn tv_after(&self, m: u32, mu: &ExplicitDistribution) -> Result<f64> {
        self.powered(m).max_row_tv(mu)
    }
}

/// Exact kernel of the intermediate-sampling chain at intermediate size `t`:
/// from `S0`, draw `T` uniform among `(t-k)`-subsets of the complement, then
/// resample from `mu` restricted to `S0 ∪ T`. Computed by summing over all T.
pub fn exact_transition_matrix(mu: &ExplicitDistribution, t: usize) -> Result<TransitionMatrix> {
    let n = mu.n();
    let k = mu.k();
    if t < k || t > n {
        return Err(Error::invalid(format!("t = {t} not in [{k}, {n}]")));
    }
    if ln_binomial(n - k, t - k) > ENUMERATION_GUARD.ln() {
        return Err(Error::TooLarge(format!(
            "C({}, {}) intermediate sets exceed the enumeration guard",
            n - k,
            t - k
        )));
    }
    let support: Vec<KSubset> = mu.support().cloned().collect();
    let dim = support.len();
    let probs: Vec<f64> = mu.entries().iter().map(|(_, p)| *p).collect();
    let t_count = binomial(n - k, t - k);
    let mut p = DMatrix::<f64>::zeros(dim, dim);
    for (row, s0) in support.iter().enumerate() {
        let complement: Vec<usize> = (0..n).filter(|i| !s0.contains(*i)).collect();
        for tset in complement.iter().combinations(t - k) {
            let mut member = vec![false; n];
            for i in s0.iter() {
                member[i] = true;
            }
            for &&i in &tset {
                member[i] = true;
            }
            // restricted mass over support sets inside S0 ∪ T
            let mut inside: Vec<(usize, f64)> = Vec::new();
            let mut mass = 0.0;
            for (col, s) in support.iter().enumerate() {
                if s.iter().all(|i| member[i]) {
                    inside.push((col, probs[col]));
                    mass += probs[col];
                }
            }
            // S0 itself is always inside, so mass > 0
            for (col, w) in inside {
                p[(row, col)] += w / (mass * t_count);
            }
        }
    }
    TransitionMatrix::validated(support, p)
}
