//! Sampling engines: exact inverse-CDF sampling, the multi-step down-up walk,
//! the intermediate-sampling chain (keep `S0`, draw a fresh uniform
//! `(t-k)`-set `T`, resample from the restriction to `S0 ∪ T`), and the
//! rejection-based variant of the same intermediate step; plus the
//! combinatorial helpers: subset containment probabilities, intermediate-size
//! selection, and initial-state finding.

use itertools::Itertools;

use crate::analysis::enumerate;
use crate::dist::{
    checked_log_weight, ln_binomial, logsumexp, ExplicitDistribution, KSubset, WeightedFamily,
    ENUMERATION_GUARD,
};
use crate::rng::RngStream;
use crate::{Error, Result};

/// How the restricted distribution inside an intermediate step is resampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerSampler {
    /// Enumerate all `C(t, k)` candidate sets and sample exactly.
    Exact,
    /// Run `steps` down-up moves of arity `l`, started at the current state.
    DownUp { l: usize, steps: usize },
}

/// Configuration of the intermediate-sampling chain.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    /// Intermediate domain size; `2k <= t <= n`.
    pub t: usize,
    /// Number of chain steps.
    pub steps: usize,
    pub inner: InnerSampler,
    /// Target one-step total-variation distance, in `(0, 1/4]`.
    pub epsilon: f64,
    pub seed: u64,
    /// Run the inner walk on the complement of the restricted family when the
    /// complement side is smaller (`k > t - k`).
    pub complement_trick: bool,
}

impl ChainConfig {
    pub fn validate(&self, n: usize, k: usize) -> Result<()> {
        if self.t < 2 * k || self.t > n {
            return Err(Error::invalid(format!(
                "t = {} outside [2k, n] = [{}, {n}]",
                self.t,
                2 * k
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 0.25) {
            return Err(Error::invalid(format!(
                "epsilon = {} outside (0, 1/4]",
                self.epsilon
            )));
        }
        if let InnerSampler::DownUp { l, .. } = self.inner {
            if l == 0 || l > k {
                return Err(Error::invalid(format!(
                    "down-up arity {l} outside [1, {k}]"
                )));
            }
        }
        Ok(())
    }
}

/// Chain length for target accuracy `eps_prime`, `max(1, ceil(ln(1/eps')))`.
pub fn default_chain_steps(eps_prime: f64) -> usize {
    assert!(eps_prime > 0.0 && eps_prime < 1.0);
    ((1.0 / eps_prime).ln().ceil() as usize).max(1)
}

/// Inner down-up step budget `ceil(k^{ceil(1/alpha)} * ln t)`.
pub fn default_inner_steps(k: usize, alpha: f64, t: usize) -> usize {
    assert!(alpha > 0.0 && alpha <= 1.0);
    let power = (1.0 / alpha).ceil() as i32;
    (((k as f64).powi(power) * (t as f64).ln()).ceil() as usize).max(1)
}

/// Floyd's algorithm: a uniform `m`-subset of `[0, pool_size)`, sorted,
/// without materializing the pool.
pub fn floyd_sample(rng: &mut RngStream, pool_size: usize, m: usize) -> Vec<usize> {
    assert!(m <= pool_size, "cannot draw {m} of {pool_size}");
    let mut chosen = std::collections::BTreeSet::new();
    for j in (pool_size - m)..pool_size {
        let r = rng.gen_index(j + 1);
        if !chosen.insert(r) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

/// Exact draw from an explicit distribution by inverse CDF over its sorted
/// table.
pub fn exact_sample(d: &ExplicitDistribution, rng: &mut RngStream) -> KSubset {
    let u = rng.next_f64();
    let mut acc = 0.0;
    for (s, p) in d.entries() {
        acc += p;
        if u < acc {
            return s.clone();
        }
    }
    // u landed in the rounding slack at the top
    d.entries().last().expect("nonempty distribution").0.clone()
}

// Sample an index proportional to exp(log_weights), in log-space.
fn sample_log_weighted(log_weights: &[f64], rng: &mut RngStream) -> Result<usize> {
    let total = logsumexp(log_weights);
    if total == f64::NEG_INFINITY {
        return Err(Error::EmptySupport(
            "all candidate weights are zero".to_string(),
        ));
    }
    let u = rng.next_f64();
    let mut acc = 0.0;
    let mut last_finite = 0;
    for (i, &lw) in log_weights.iter().enumerate() {
        if lw == f64::NEG_INFINITY {
            continue;
        }
        last_finite = i;
        acc += (lw - total).exp();
        if u < acc {
            return Ok(i);
        }
    }
    Ok(last_finite)
}

/// One down-up move restricted to `pool`: remove a uniform `l`-subset of `s`,
/// then re-add `l` elements of the pool proportionally to the weight of the
/// completed set. `pool = None` means the full ground set. Reversible with
/// stationary distribution (the restriction of) mu.
pub fn downup_step(
    fam: &dyn WeightedFamily,
    s: &KSubset,
    l: usize,
    pool: Option<&KSubset>,
    rng: &mut RngStream,
) -> Result<KSubset> {
    let k = fam.set_size();
    if l == 0 || l > k {
        return Err(Error::invalid(format!(
            "down-up arity {l} outside [1, {k}]"
        )));
    }
    let dropped_pos = floyd_sample(rng, k, l);
    let kept: Vec<usize> = s
        .iter()
        .enumerate()
        .filter(|(pos, _)| dropped_pos.binary_search(pos).is_err())
        .map(|(_, e)| e)
        .collect();
    let kept = KSubset::from_sorted_unchecked(kept);
    let candidates: Vec<usize> = match pool {
        Some(p) => p.iter().filter(|&e| !kept.contains(e)).collect(),
        None => (0..fam.ground_size())
            .filter(|&e| !kept.contains(e))
            .collect(),
    };
    let mut sets: Vec<KSubset> = Vec::new();
    let mut log_weights: Vec<f64> = Vec::new();
    for addition in candidates.iter().combinations(l) {
        let add = KSubset::from_sorted_unchecked(addition.into_iter().copied().collect());
        let cand = kept.union(&add);
        log_weights.push(checked_log_weight(fam, &cand)?);
        sets.push(cand);
    }
    // re-adding the dropped elements restores s, so some weight is positive
    let idx = sample_log_weighted(&log_weights, rng).map_err(|_| {
        Error::ContractViolation(format!(
            "all completions of {:?} have zero weight",
            kept.as_slice()
        ))
    })?;
    Ok(sets.swap_remove(idx))
}

/// `(lower, exact, upper)` for the probability that a uniform `t`-subset `T`
/// of `[n]`, conditioned on containing a fixed `v`-set, also contains a fixed
/// disjoint `u`-set: exact `C(n-v-u, t-v-u) / C(n-v, t-v)`, sandwiched by
/// `((t-u-v)/(n-u-v))^u` and `((t-v)/(n-v))^u`.
pub fn subset_containment_probability(
    n: usize,
    t: usize,
    u: usize,
    v: usize,
) -> Result<(f64, f64, f64)> {
    if u + v > t || t > n {
        return Err(Error::invalid(format!(
            "need u + v <= t <= n, got u={u} v={v} t={t} n={n}"
        )));
    }
    let exact = (ln_binomial(n - v - u, t - v - u) - ln_binomial(n - v, t - v)).exp();
    let lower = if u == 0 || n == u + v {
        if u == 0 {
            1.0
        } else {
            exact
        }
    } else {
        (((t - u - v) as f64) / ((n - u - v) as f64)).powi(u as i32)
    };
    let upper = if u == 0 {
        1.0
    } else {
        (((t - v) as f64) / ((n - v) as f64)).powi(u as i32)
    };
    Ok((lower, exact, upper))
}

/// Intermediate domain size
/// `clamp(ceil(c0 * n^{1-alpha} * (C k^2 ln(1/(1-eps)))^alpha), 2k, n)`.
pub fn choose_t(n: usize, k: usize, alpha: f64, c: f64, eps: f64, c0: f64) -> usize {
    assert!(
        alpha > 0.0 && alpha <= 1.0,
        "alpha = {alpha} outside (0, 1]"
    );
    assert!(c >= 1.0, "marginal bound C = {c} below 1");
    assert!(eps > 0.0 && eps <= 0.25, "eps = {eps} outside (0, 1/4]");
    assert!(c0 > 0.0);
    let nf = n as f64;
    let kf = k as f64;
    let raw = c0 * nf.powf(1.0 - alpha) * (c * kf * kf * (1.0 / (1.0 - eps)).ln()).powf(alpha);
    (raw.ceil() as usize).clamp(2 * k, n)
}

/// Result of calibrating the unspecified constant in [`choose_t`] against an
/// enumerable held-out instance.
#[derive(Debug, Clone, Copy)]
pub struct Calibration {
    /// Smallest `t` whose exact kernel dominates `(1 - eps) mu`.
    pub t_star: usize,
    pub c0: f64,
}

/// Scans `t` upward from `2k` until the exact one-step kernel satisfies
/// `min_{S0,S} P(S0,S)/mu(S) >= 1 - eps`, then back-solves `c0` so that
/// [`choose_t`] reproduces that `t` on this instance.
pub fn calibrate_c0(fam: &dyn WeightedFamily, alpha: f64, c: f64, eps: f64) -> Result<Calibration> {
    let n = fam.ground_size();
    let k = fam.set_size();
    let mu = enumerate(fam)?;
    for t in (2 * k)..=n {
        let kernel = crate::analysis::exact_transition_matrix(&mu, t)?;
        if kernel.min_ratio(&mu)? >= 1.0 - eps {
            let nf = n as f64;
            let kf = k as f64;
            let scale = nf.powf(1.0 - alpha) * (c * kf * kf * (1.0 / (1.0 - eps)).ln()).powf(alpha);
            return Ok(Calibration {
                t_star: t,
                c0: t as f64 / scale,
            });
        }
    }
    Err(Error::Sampler(format!(
        "no t in [2k, n] = [{}, {n}] achieves one-step domination 1 - {eps}",
        2 * k
    )))
}

// Resample from mu restricted to `pool` using the configured inner sampler,
// starting from `s0` (which has positive weight inside the pool).
fn inner_downsample(
    fam: &dyn WeightedFamily,
    s0: &KSubset,
    pool: &KSubset,
    inner: InnerSampler,
    complement_trick: bool,
    rng: &mut RngStream,
) -> Result<KSubset> {
    let k = fam.set_size();
    match inner {
        InnerSampler::Exact => {
            let d = restricted_distribution(fam, pool)?;
            Ok(exact_sample(&d, rng))
        }
        InnerSampler::DownUp { l, steps } => {
            let co_k = pool.len() - k;
            if complement_trick && k > co_k && co_k > 0 {
                let co_fam = PoolComplement { fam, pool };
                let mut s = pool_difference(pool, s0);
                let co_l = l.min(co_k);
                for _ in 0..steps {
                    s = downup_step(&co_fam, &s, co_l, Some(pool), rng)?;
                }
                return Ok(pool_difference(pool, &s));
            }
            let mut s = s0.clone();
            for _ in 0..steps {
                s = downup_step(fam, &s, l, Some(pool), rng)?;
            }
            Ok(s)
        }
    }
}

/// Explicit distribution of mu restricted to the index pool, normalized over
/// the sets inside it.
pub fn restricted_distribution(
    fam: &dyn WeightedFamily,
    pool: &KSubset,
) -> Result<ExplicitDistribution> {
    let k = fam.set_size();
    if ln_binomial(pool.len(), k) > ENUMERATION_GUARD.ln() {
        return Err(Error::TooLarge(format!(
            "C({}, {k}) restricted sets exceed the enumeration guard",
            pool.len()
        )));
    }
    let elements: Vec<usize> = pool.iter().collect();
    let mut items = Vec::new();
    for c in elements.iter().combinations(k) {
        let s = KSubset::from_sorted_unchecked(c.into_iter().copied().collect());
        let lw = checked_log_weight(fam, &s)?;
        if lw > f64::NEG_INFINITY {
            items.push((s, lw));
        }
    }
    ExplicitDistribution::from_log_weights(fam.ground_size(), k, items)
}

fn pool_difference(pool: &KSubset, s: &KSubset) -> KSubset {
    KSubset::from_sorted_unchecked(pool.iter().filter(|&e| !s.contains(e)).collect())
}

// View of the restricted family from the complement side: a `(t-k)`-subset c
// of the pool weighs mu(pool \ c).
struct PoolComplement<'a> {
    fam: &'a dyn WeightedFamily,
    pool: &'a KSubset,
}

impl WeightedFamily for PoolComplement<'_> {
    fn ground_size(&self) -> usize {
        self.fam.ground_size()
    }
    fn set_size(&self) -> usize {
        self.pool.len() - self.fam.set_size()
    }
    fn log_weight(&self, s: &KSubset) -> f64 {
        if !s.is_subset_of(self.pool) {
            return f64::NEG_INFINITY;
        }
        self.fam.log_weight(&pool_difference(self.pool, s))
    }
}

/// One step of the intermediate-sampling chain: draw `T` uniform among
/// `(t-k)`-subsets of `[n] \ S0`, then resample from mu restricted to
/// `S0 ∪ T`.
pub fn intermediate_step(
    fam: &dyn WeightedFamily,
    s0: &KSubset,
    cfg: &ChainConfig,
    rng: &mut RngStream,
) -> Result<KSubset> {
    let n = fam.ground_size();
    let k = fam.set_size();
    cfg.validate(n, k)?;
    if checked_log_weight(fam, s0)? == f64::NEG_INFINITY {
        return Err(Error::invalid(format!(
            "start state {:?} outside the support",
            s0.as_slice()
        )));
    }
    let complement: Vec<usize> = (0..n).filter(|&e| !s0.contains(e)).collect();
    let picks = floyd_sample(rng, complement.len(), cfg.t - k);
    let tset = KSubset::from_sorted_unchecked(picks.into_iter().map(|i| complement[i]).collect());
    let pool = s0.union(&tset);
    inner_downsample(fam, s0, &pool, cfg.inner, cfg.complement_trick, rng).map_err(|e| {
        Error::Sampler(format!(
            "inner downsample failed from S0 = {:?}, T = {:?}: {e}",
            s0.as_slice(),
            tset.as_slice()
        ))
    })
}

/// Runs [`intermediate_step`] `cfg.steps` times from `s0`.
pub fn run_chain(
    fam: &dyn WeightedFamily,
    s0: &KSubset,
    cfg: &ChainConfig,
    rng: &mut RngStream,
) -> Result<KSubset> {
    let mut s = s0.clone();
    for _ in 0..cfg.steps {
        s = intermediate_step(fam, &s, cfg, rng)?;
    }
    Ok(s)
}

const REJECTION_TRY_LIMIT: usize = 1_000_000;

/// Rejection-based intermediate step: propose `T`, accept `S0 ∪ T` with
/// probability `mu(S0 ∪ T) / M` where `mu(R)` is the unnormalized mass of sets
/// inside `R` and `M` bounds it from above, then downsample exactly. Returns
/// the sample and the number of proposals consumed.
pub fn rejection_intermediate_step(
    fam: &dyn WeightedFamily,
    s0: &KSubset,
    t: usize,
    m_bound: f64,
    rng: &mut RngStream,
) -> Result<(KSubset, usize)> {
    let n = fam.ground_size();
    let k = fam.set_size();
    if t < k || t > n {
        return Err(Error::invalid(format!("t = {t} outside [{k}, {n}]")));
    }
    if !(m_bound > 0.0) {
        return Err(Error::invalid("rejection bound M must be positive"));
    }
    let log_m = m_bound.ln();
    let complement: Vec<usize> = (0..n).filter(|&e| !s0.contains(e)).collect();
    for tries in 1..=REJECTION_TRY_LIMIT {
        let picks = floyd_sample(rng, complement.len(), t - k);
        let tset =
            KSubset::from_sorted_unchecked(picks.into_iter().map(|i| complement[i]).collect());
        let pool = s0.union(&tset);
        let d = restricted_distribution(fam, &pool)?;
        let log_mass = d.log_z();
        if log_mass > log_m + 1e-9 {
            return Err(Error::ContractViolation(format!(
                "observed intermediate mass {} exceeds the supplied bound {m_bound}",
                log_mass.exp()
            )));
        }
        if rng.next_f64() < (log_mass - log_m).exp() {
            return Ok((exact_sample(&d, rng), tries));
        }
    }
    Err(Error::Sampler(format!(
        "no acceptance within {REJECTION_TRY_LIMIT} proposals"
    )))
}

const HOOK_TRIES: usize = 16;
const RANDOM_TRIES: usize = 200;

/// Finds some support element: family hook first, then random probing, then
/// enumeration as a last resort.
pub fn find_initial_state(fam: &dyn WeightedFamily, rng: &mut RngStream) -> Result<KSubset> {
    let n = fam.ground_size();
    let k = fam.set_size();
    for _ in 0..HOOK_TRIES {
        if let Some(s) = fam.support_sample(rng) {
            if checked_log_weight(fam, &s)?.is_finite() {
                return Ok(s);
            }
        }
    }
    for _ in 0..RANDOM_TRIES {
        let s = KSubset::from_sorted_unchecked(floyd_sample(rng, n, k));
        if checked_log_weight(fam, &s)?.is_finite() {
            return Ok(s);
        }
    }
    match enumerate(fam) {
        Ok(d) => Ok(exact_sample(&d, rng)),
        Err(e) => Err(Error::Sampler(format!(
            "no support element after {HOOK_TRIES} hook and {RANDOM_TRIES} random probes; \
             enumeration fallback: {e}"
        ))),
    }
}
