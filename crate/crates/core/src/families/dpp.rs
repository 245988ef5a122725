use std::sync::atomic::{AtomicU64, Ordering};

use itertools::Itertools;
use nalgebra::DMatrix;

use crate::dist::{ln_binomial, KSubset, WeightedFamily};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Principal minors in `[-CLAMP_TOL, 0)` are treated as numerical noise and
/// clamped to weight zero.
const CLAMP_TOL: f64 = 1e-9;

/// Construction-time minor sweep is skipped above this many candidate sets.
const MINOR_CHECK_GUARD: f64 = 1e5;

/// Nonsymmetric k-determinantal point process: `mu(S) = det(L_{S,S})` for an
/// `n x n` kernel with positive semidefinite symmetric part.
pub struct DppFamily {
    l: DMatrix<f64>,
    k: usize,
    clamp_warnings: AtomicU64,
}

/// Builds a DPP family, checking `L + L^T >= 0` (min eigenvalue >= -1e-9) and,
/// at desk scale, that every `k x k` principal minor is `>= -1e-9`.
pub fn make_dpp(l: DMatrix<f64>, k: usize) -> Result<DppFamily> {
    let n = l.nrows();
    if l.ncols() != n {
        return Err(Error::Construction(format!(
            "kernel must be square, got {}x{}",
            l.nrows(),
            l.ncols()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k={k} out of [1, {n}]")));
    }
    let sym = (&l + l.transpose()) * 0.5;
    let eigs = sym.symmetric_eigenvalues();
    let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    // min eigenvalue of L + L^T is twice that of the symmetric part
    if 2.0 * min_eig < -CLAMP_TOL {
        return Err(Error::Construction(format!(
            "L + L^T has eigenvalue {:.3e} < -{CLAMP_TOL:.0e}",
            2.0 * min_eig
        )));
    }
    let fam = DppFamily {
        l,
        k,
        clamp_warnings: AtomicU64::new(0),
    };
    if ln_binomial(n, k) <= MINOR_CHECK_GUARD.ln() {
        for s in (0..n).combinations(k) {
            let d = fam.minor(&s);
            if d < -CLAMP_TOL {
                return Err(Error::Construction(format!(
                    "principal minor {s:?} is {d:.3e} < -{CLAMP_TOL:.0e}"
                )));
            }
        }
    }
    Ok(fam)
}

impl DppFamily {
    fn minor(&self, s: &[usize]) -> f64 {
        let m = DMatrix::from_fn(s.len(), s.len(), |r, c| self.l[(s[r], s[c])]);
        // LU with partial pivoting
        m.lu().determinant()
    }

    /// How many minors were clamped to zero weight for being negative but
    /// within tolerance.
    pub fn clamp_warning_count(&self) -> u64 {
        self.clamp_warnings.load(Ordering::Relaxed)
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.l
    }
}

impl WeightedFamily for DppFamily {
    fn ground_size(&self) -> usize {
        self.l.nrows()
    }

    fn set_size(&self) -> usize {
        self.k
    }

    fn log_weight(&self, s: &KSubset) -> f64 {
        let d = self.minor(s.as_slice());
        if d > 0.0 {
            d.ln()
        } else {
            if d < 0.0 && d >= -CLAMP_TOL {
                self.clamp_warnings.fetch_add(1, Ordering::Relaxed);
            }
            f64::NEG_INFINITY
        }
    }

    fn support_sample(&self, rng: &mut RngStream) -> Option<KSubset> {
        // Greedy pivoted extension: grow a set keeping its principal minor
        // bounded away from zero.
        let n = self.ground_size();
        'attempt: for _ in 0..16 {
            let mut order: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut order);
            let mut picked: Vec<usize> = Vec::with_capacity(self.k);
            for &cand in &order {
                let mut trial = picked.clone();
                trial.push(cand);
                trial.sort_unstable();
                if self.minor(&trial).abs() > 1e-12 {
                    picked = trial;
                    if picked.len() == self.k {
                        let s = KSubset::from_sorted_unchecked(picked);
                        if self.log_weight(&s).is_finite() {
                            return Some(s);
                        }
                        continue 'attempt;
                    }
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diag_kernel_weights() {
        // L = diag(1, 3), k = 1: weights 1 and 3
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let f = make_dpp(l, 1).unwrap();
        let w0 = f.log_weight(&KSubset::new(vec![0]).unwrap()).exp();
        let w1 = f.log_weight(&KSubset::new(vec![1]).unwrap()).exp();
        assert!((w0 - 1.0).abs() < 1e-12);
        assert!((w1 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn nonsymmetric_two_by_two() {
        // L = [[2,1],[0,2]], k = 2: single set {0,1} with det 4
        let l = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        let f = make_dpp(l, 2).unwrap();
        let lw = f.log_weight(&KSubset::new(vec![0, 1]).unwrap());
        assert!((lw - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn identity_kernel_is_uniform() {
        let f = make_dpp(DMatrix::identity(4, 4), 2).unwrap();
        use itertools::Itertools;
        for c in (0..4).combinations(2) {
            let lw = f.log_weight(&KSubset::new(c).unwrap());
            assert!((lw - 0.0).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_symmetric_part_rejected() {
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = match make_dpp(l, 1) {
            Err(e) => e,
            Ok(_) => panic!("indefinite kernel accepted"),
        };
        assert!(err.to_string().contains("eigenvalue"));
    }

    #[test]
    fn support_sample_hits_support() {
        let l = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, -1.0, 2.0, 0.5, 0.0, -0.5, 1.0]);
        let f = make_dpp(l, 2).unwrap();
        let mut rng = RngStream::new(11, 0);
        let s = f.support_sample(&mut rng).unwrap();
        assert!(f.log_weight(&s).is_finite());
    }
}
