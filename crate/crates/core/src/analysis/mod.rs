//! Exact desk-scale oracles and certificates: enumeration, marginals, TV/KL,
//! generating-polynomial evaluation, the entropic-independence tangent check,
//! correlation matrices with their spectra, and exact transition kernels.
//!
//! Everything here is brute force on purpose: these are the reference
//! implementations the samplers are tested against.

mod correlation;
mod kernel;

pub use correlation::{correlation_matrix, flc_certificate, CorrelationMatrix, FlcReport};
pub use kernel::{exact_transition_matrix, TransitionMatrix};

use itertools::Itertools;

use crate::dist::{
    checked_log_weight, ln_binomial, logsumexp, ExplicitDistribution, KSubset, WeightedFamily,
    ENUMERATION_GUARD,
};
use crate::{Error, Result};

/// Brute-force enumeration of every size-k subset, refusing instances with
/// more than [`ENUMERATION_GUARD`] candidates.
pub fn enumerate(fam: &dyn WeightedFamily) -> Result<ExplicitDistribution> {
    enumerate_with_guard(fam, ENUMERATION_GUARD)
}

/// [`enumerate`] with a caller-chosen candidate-count guard.
pub fn enumerate_with_guard(fam: &dyn WeightedFamily, guard: f64) -> Result<ExplicitDistribution> {
    let n = fam.ground_size();
    let k = fam.set_size();
    if ln_binomial(n, k) > guard.ln() {
        return Err(Error::TooLarge(format!(
            "C({n},{k}) exceeds the enumeration guard {guard:.0}"
        )));
    }
    let mut items = Vec::new();
    for c in (0..n).combinations(k) {
        let s = KSubset::from_sorted_unchecked(c);
        let lw = checked_log_weight(fam, &s)?;
        if lw > f64::NEG_INFINITY {
            items.push((s, lw));
        }
    }
    ExplicitDistribution::from_log_weights(n, k, items)
}

/// Exact single-element marginals `P_{S~mu}[i in S]` by enumeration.
pub fn exact_marginals(fam: &dyn WeightedFamily) -> Result<Vec<f64>> {
    Ok(enumerate(fam)?.marginals())
}

/// Total variation distance `(1/2) sum |p(S) - q(S)|` between two explicit
/// distributions over the same universe.
pub fn tv_distance(p: &ExplicitDistribution, q: &ExplicitDistribution) -> Result<f64> {
    check_same_universe(p, q)?;
    Ok(tv_merge(p, q))
}

fn check_same_universe(p: &ExplicitDistribution, q: &ExplicitDistribution) -> Result<()> {
    if p.n() != q.n() || p.k() != q.k() {
        return Err(Error::DimensionMismatch(format!(
            "({}, {}) vs ({}, {})",
            p.n(),
            p.k(),
            q.n(),
            q.k()
        )));
    }
    Ok(())
}

// Merge the two sorted support lists; sets missing from one side contribute
// their full mass.
fn tv_merge(p: &ExplicitDistribution, q: &ExplicitDistribution) -> f64 {
    let a = p.entries();
    let b = q.entries();
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some((s, pp)), Some((t, qq))) => match s.cmp(t) {
                std::cmp::Ordering::Less => {
                    total += pp;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    total += qq;
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    total += (pp - qq).abs();
                    i += 1;
                    j += 1;
                }
            },
            (Some((_, pp)), None) => {
                total += pp;
                i += 1;
            }
            (None, Some((_, qq))) => {
                total += qq;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    total / 2.0
}

/// `D_KL(nu || mu)` in nats, with `0 log 0 = 0` and `+inf` when `nu` charges a
/// `mu`-null set.
pub fn kl_divergence(nu: &ExplicitDistribution, mu: &ExplicitDistribution) -> Result<f64> {
    check_same_universe(nu, mu)?;
    let mut total = 0.0;
    for (s, p) in nu.entries() {
        let q = mu.prob(s);
        if q == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += p * (p / q).ln();
    }
    // tiny negative values are rounding noise
    Ok(total.max(0.0))
}

/// `g_mu(z) = sum_S mu(S) prod_{i in S} z_i`, accumulated in log-space.
pub fn generating_polynomial(mu: &ExplicitDistribution, z: &[f64]) -> Result<f64> {
    Ok(log_generating_polynomial(mu, z)?.exp())
}

/// `ln g_mu(z)`; `-inf` when every supported monomial vanishes.
pub fn log_generating_polynomial(mu: &ExplicitDistribution, z: &[f64]) -> Result<f64> {
    if z.len() != mu.n() {
        return Err(Error::DimensionMismatch(format!(
            "z has length {}, ground set has {}",
            z.len(),
            mu.n()
        )));
    }
    if z.iter().any(|&v| v < 0.0 || v.is_nan()) {
        return Err(Error::invalid("generating polynomial requires z >= 0"));
    }
    let log_z: Vec<f64> = z.iter().map(|&v| v.ln()).collect();
    let terms: Vec<f64> = mu
        .entries()
        .iter()
        .map(|(s, p)| p.ln() + s.iter().map(|i| log_z[i]).sum::<f64>())
        .collect();
    Ok(logsumexp(&terms))
}

/// Result of sweeping the tangent inequality
/// `g_mu(z^alpha)^{1/(k alpha)} <= sum_i p_i z_i` over a list of z-points.
#[derive(Debug, Clone)]
pub struct EiTangentReport {
    pub alpha: f64,
    pub points: usize,
    /// Largest observed `lhs - rhs`.
    pub max_violation: f64,
    pub pass: bool,
}

/// Checks the tangent inequality at each supplied z-point, with
/// `p = mu D_{k->1}` (marginals over k). PASS iff the worst violation is at
/// most 1e-9.
pub fn ei_tangent_check(
    mu: &ExplicitDistribution,
    alpha: f64,
    z_points: &[Vec<f64>],
) -> Result<EiTangentReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} not in (0, 1]")));
    }
    let k = mu.k() as f64;
    let p: Vec<f64> = mu.marginals().iter().map(|m| m / k).collect();
    let mut max_violation = f64::NEG_INFINITY;
    for z in z_points {
        let z_alpha: Vec<f64> = z.iter().map(|&v| v.powf(alpha)).collect();
        let lhs = (log_generating_polynomial(mu, &z_alpha)? / (k * alpha)).exp();
        let rhs: f64 = p.iter().zip(z).map(|(pi, zi)| pi * zi).sum();
        max_violation = max_violation.max(lhs - rhs);
    }
    if z_points.is_empty() {
        max_violation = 0.0;
    }
    Ok(EiTangentReport {
        alpha,
        points: z_points.len(),
        max_violation,
        pass: max_violation <= 1e-9,
    })
}

/// `mu(T) = sum_{S subseteq T} mu(S)` (the superset-mass abuse of notation).
pub fn mass_of_superset(mu: &ExplicitDistribution, t: &[usize]) -> Result<f64> {
    let mut member = vec![false; mu.n()];
    for &i in t {
        if i >= mu.n() {
            return Err(Error::invalid(format!("index {i} out of [0, {})", mu.n())));
        }
        member[i] = true;
    }
    Ok(mu
        .entries()
        .iter()
        .filter(|(s, _)| s.iter().all(|i| member[i]))
        .map(|(_, p)| p)
        .sum())
}
