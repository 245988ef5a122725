use nalgebra::DMatrix;

use super::enumerate;
use crate::dist::{apply_external_field, ExplicitDistribution, ExternalField, Family};
use crate::rng::RngStream;
use crate::{Error, Result};

/// The correlation matrix `Psi(i,i) = 1 - P[i]`,
/// `Psi(i,j) = P[j|i] - P[j]`, built over the elements with positive marginal.
/// Zero-marginal elements are dropped and listed in `dropped`.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    psi: DMatrix<f64>,
    marginals: Vec<f64>,
    retained: Vec<usize>,
    dropped: Vec<usize>,
}

/// Builds the correlation matrix of an explicit distribution.
pub fn correlation_matrix(mu: &ExplicitDistribution) -> Result<CorrelationMatrix> {
    let n = mu.n();
    let all = mu.marginals();
    let retained: Vec<usize> = (0..n).filter(|&i| all[i] > 0.0).collect();
    let dropped: Vec<usize> = (0..n).filter(|&i| all[i] == 0.0).collect();
    let m = retained.len();
    if m == 0 {
        return Err(Error::EmptySupport("all marginals are zero".to_string()));
    }
    // position of each original index among the retained ones
    let mut pos = vec![usize::MAX; n];
    for (r, &i) in retained.iter().enumerate() {
        pos[i] = r;
    }
    let marginals: Vec<f64> = retained.iter().map(|&i| all[i]).collect();
    if marginals.iter().any(|&p| !(p > 0.0) || p.is_nan()) {
        return Err(Error::invalid(
            "retained element with non-positive marginal",
        ));
    }
    // pairwise joints P[i and j in S]
    let mut joint = DMatrix::<f64>::zeros(m, m);
    for (s, p) in mu.entries() {
        let members: Vec<usize> = s.iter().map(|i| pos[i]).collect();
        for &a in &members {
            for &b in &members {
                joint[(a, b)] += p;
            }
        }
    }
    let psi = DMatrix::from_fn(m, m, |a, b| {
        if a == b {
            1.0 - marginals[a]
        } else {
            joint[(a, b)] / marginals[a] - marginals[b]
        }
    });
    Ok(CorrelationMatrix {
        psi,
        marginals,
        retained,
        dropped,
    })
}

impl CorrelationMatrix {
    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    /// Marginals of the retained elements, aligned with `retained()`.
    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.psi.nrows())
            .map(|r| self.psi.row(r).iter().sum())
            .collect()
    }

    /// Eigenvalues, ascending. Psi is self-adjoint in the marginal-weighted
    /// inner product, so `D^{1/2} Psi D^{-1/2}` with `D = diag(P[i])` is
    /// symmetric up to rounding; we symmetrize and use a symmetric solver.
    pub fn spectrum(&self) -> Vec<f64> {
        let m = self.psi.nrows();
        let b = DMatrix::from_fn(m, m, |a, c| {
            self.psi[(a, c)] * (self.marginals[a] / self.marginals[c]).sqrt()
        });
        let sym = (&b + b.transpose()) * 0.5;
        let mut eigs: Vec<f64> = sym.symmetric_eigenvalues().iter().cloned().collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eigs
    }

    pub fn lambda_max(&self) -> f64 {
        *self
            .spectrum()
            .last()
            .expect("correlation matrix is nonempty")
    }
}

/// Randomized falsifier for the fractional-log-concavity eigenvalue bound
/// `lambda_max(Psi_{lambda * mu}) <= 1/alpha` over all positive fields.
#[derive(Debug, Clone)]
pub struct FlcReport {
    pub alpha: f64,
    pub trials: usize,
    /// Largest eigenvalue seen across all sampled fields — a lower bound on
    /// the true supremum; PASS means "no violation found", not a proof.
    pub max_lambda_max: f64,
    pub pass: bool,
    /// The field achieving `max_lambda_max`.
    pub witness: Vec<f64>,
}

/// Sweeps `trials` random positive external fields, entries log-uniform in
/// `[e^-3, e^3]`, and checks `lambda_max(Psi_{lambda * mu}) <= 1/alpha + 1e-8`
/// for each.
pub fn flc_certificate(
    fam: &Family,
    alpha: f64,
    trials: usize,
    rng: &mut RngStream,
) -> Result<FlcReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} not in (0, 1]")));
    }
    let n = fam.ground_size();
    let mut max_lambda_max = f64::NEG_INFINITY;
    let mut witness = vec![1.0; n];
    // include the identity field, then random ones
    for trial in 0..=trials {
        let lambda: Vec<f64> = if trial == 0 {
            vec![1.0; n]
        } else {
            (0..n).map(|_| (6.0 * rng.next_f64() - 3.0).exp()).collect()
        };
        let mut field = ExternalField::multiplicative(n);
        for (i, &v) in lambda.iter().enumerate() {
            field.set(i, v)?;
        }
        let fielded = apply_external_field(fam.clone(), field)?;
        let d = enumerate(&fielded)?;
        let lmax = correlation_matrix(&d)?.lambda_max();
        if lmax > max_lambda_max {
            max_lambda_max = lmax;
            witness = lambda;
        }
    }
    Ok(FlcReport {
        alpha,
        trials,
        max_lambda_max,
        pass: max_lambda_max <= 1.0 / alpha + 1e-8,
        witness,
    })
}
