//! The end-to-end flow: estimate marginals once, build the isotropic
//! transformation, draw a sparse domain (restriction set plus external field)
//! per chain step, and reduce counting to sampling.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::enumerate;
use crate::dist::{
    apply_external_field, binomial, checked_log_weight, ln_binomial, logsumexp, ExternalField,
    Family, KSubset, SubdivisionMap, WeightedFamily,
};
use crate::rng::RngStream;
use crate::samplers::{
    choose_t, default_chain_steps, default_inner_steps, downup_step, exact_sample,
    find_initial_state, floyd_sample, restricted_distribution, ChainConfig, InnerSampler,
};
use crate::{Error, Result};

/// Marginal estimates `p` with the structural guarantees the sparsification
/// theorem needs: `sum p_i = k` and `p_i >= eta * k / n`.
#[derive(Debug, Clone)]
pub struct MarginalEstimates {
    p: Vec<f64>,
    k: usize,
    eta: f64,
    sample_count: usize,
}

impl MarginalEstimates {
    pub fn new(p: Vec<f64>, k: usize, eta: f64, sample_count: usize) -> Result<Self> {
        let n = p.len();
        if n == 0 || k == 0 || k > n {
            return Err(Error::invalid(format!("bad dimensions n={n}, k={k}")));
        }
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::invalid(format!("eta = {eta} outside [0, 1)")));
        }
        let total: f64 = p.iter().sum();
        if (total - k as f64).abs() > 1e-9 {
            return Err(Error::ContractViolation(format!(
                "estimates sum to {total}, not k = {k}"
            )));
        }
        let floor = eta * k as f64 / n as f64;
        if p.iter().any(|&v| v < floor - 1e-12 || v.is_nan()) {
            return Err(Error::ContractViolation(format!(
                "estimate below the floor eta*k/n = {floor}"
            )));
        }
        Ok(MarginalEstimates {
            p,
            k,
            eta,
            sample_count,
        })
    }

    /// Wraps exact marginals (no blending, no sampling).
    pub fn exact(marginals: Vec<f64>, k: usize) -> Result<Self> {
        MarginalEstimates::new(marginals, k, 0.0, 0)
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }
}

/// Default preprocessing sample count `ceil(8 (n/k) ln(2n/delta))`.
pub fn default_marginal_samples(n: usize, k: usize, delta: f64) -> usize {
    assert!(delta > 0.0 && delta < 1.0);
    (8.0 * n as f64 / k as f64 * (2.0 * n as f64 / delta).ln()).ceil() as usize
}

/// Estimates marginals from `n_samples` draws of `sampler` and blends with the
/// uniform vector: `p = (1 - eta) * freq + eta * (k/n) * 1`. Both invariants
/// hold by construction.
pub fn estimate_marginals<F>(
    fam: &dyn WeightedFamily,
    mut sampler: F,
    n_samples: usize,
    eta: f64,
    rng: &mut RngStream,
) -> Result<MarginalEstimates>
where
    F: FnMut(&mut RngStream) -> Result<KSubset>,
{
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("eta = {eta} outside (0, 1)")));
    }
    let n = fam.ground_size();
    let k = fam.set_size();
    let mut counts = vec![0u64; n];
    for _ in 0..n_samples {
        let s = sampler(rng)?;
        for i in s.iter() {
            counts[i] += 1;
        }
    }
    let uniform = k as f64 / n as f64;
    let p: Vec<f64> = counts
        .iter()
        .map(|&c| (1.0 - eta) * (c as f64 / n_samples as f64) + eta * uniform)
        .collect();
    MarginalEstimates::new(p, k, eta, n_samples)
}

/// The isotropic transformation: element `i` becomes `t_i = ceil((n/k) p_i)`
/// interchangeable copies. Guarantees `|U| = sum t_i <= 2n`.
pub fn isotropic_transform(est: &MarginalEstimates) -> Result<SubdivisionMap> {
    let n = est.n();
    let k = est.k();
    let scale = n as f64 / k as f64;
    let counts: Vec<usize> = est
        .p()
        .iter()
        .map(|&p| ((scale * p - 1e-9).ceil() as usize).max(1))
        .collect();
    let map = SubdivisionMap::new(counts)?;
    let total = map.total();
    if total > 2 * n {
        return Err(Error::ContractViolation(format!(
            "|U| = {total} exceeds 2n = {}",
            2 * n
        )));
    }
    Ok(map)
}

/// A sparse domain: the restriction set `R`, the external field
/// `lambda_i = c_i / t_i`, and the drawn copy counts, aligned with `support`.
#[derive(Debug, Clone)]
pub struct SparseDomain {
    pub support: Vec<usize>,
    pub field: ExternalField,
    pub counts: Vec<usize>,
}

impl SparseDomain {
    pub fn support_set(&self) -> KSubset {
        KSubset::from_sorted_unchecked(self.support.clone())
    }
}

/// Builds the domain induced by an explicit list of drawn flat copies
/// (excluding the designated copies of `S0`, which are always included).
pub fn domain_from_copy_draw(
    map: &SubdivisionMap,
    s0: &KSubset,
    drawn_flats: &[usize],
) -> Result<SparseDomain> {
    let n = map.original_size();
    s0.validate_ground(n)?;
    let mut counts_by_original = vec![0usize; n];
    for i in s0.iter() {
        counts_by_original[i] += 1;
    }
    for &flat in drawn_flats {
        let (orig, _) = map.to_original(flat);
        counts_by_original[orig] += 1;
    }
    let mut support = Vec::new();
    let mut counts = Vec::new();
    let mut field = ExternalField::restriction(n);
    for (i, &c) in counts_by_original.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let t_i = map.count(i);
        if c > t_i {
            return Err(Error::ContractViolation(format!(
                "{c} copies of element {i} drawn, only {t_i} exist"
            )));
        }
        field.set(i, c as f64 / t_i as f64)?;
        support.push(i);
        counts.push(c);
    }
    Ok(SparseDomain {
        support,
        field,
        counts,
    })
}

/// Draws a uniform `(t-k)`-subset of `U` minus one designated copy per `S0`
/// element, and folds it into a sparse domain `(R, lambda)`.
pub fn draw_sparse_domain(
    map: &SubdivisionMap,
    s0: &KSubset,
    t: usize,
    rng: &mut RngStream,
) -> Result<SparseDomain> {
    let k = s0.len();
    let total = map.total();
    if t < 2 * k || t > total {
        return Err(Error::invalid(format!(
            "t = {t} outside [2k, |U|] = [{}, {total}]",
            2 * k
        )));
    }
    // designated copy of each S0 element: its first copy
    let designated: Vec<usize> = s0.iter().map(|i| map.to_flat(i, 0)).collect();
    let ranks = floyd_sample(rng, total - k, t - k);
    // rank -> flat index, skipping the designated copies (ascending)
    let drawn: Vec<usize> = ranks
        .into_iter()
        .map(|r| {
            let mut flat = r;
            for &d in &designated {
                if flat >= d {
                    flat += 1;
                }
            }
            flat
        })
        .collect();
    domain_from_copy_draw(map, s0, &drawn)
}

/// One end-to-end sparsified sample: run the intermediate chain where each
/// step restricts `lambda * mu` to the drawn sparse domain and resamples
/// there. `cfg.t` counts copies of `U`, so `2k <= cfg.t <= |U|`.
pub fn sparsified_sample(
    fam: &Family,
    map: &SubdivisionMap,
    cfg: &ChainConfig,
    rng: &mut RngStream,
) -> Result<KSubset> {
    let k = fam.set_size();
    if map.original_size() != fam.ground_size() {
        return Err(Error::DimensionMismatch(format!(
            "subdivision over {} elements, family over {}",
            map.original_size(),
            fam.ground_size()
        )));
    }
    cfg.validate(map.total(), k)?;
    let mut s = find_initial_state(fam, rng)?;
    for _ in 0..cfg.steps {
        let domain = draw_sparse_domain(map, &s, cfg.t, rng)?;
        let view = apply_external_field(fam.clone(), domain.field.clone())?;
        let pool = domain.support_set();
        s = match cfg.inner {
            InnerSampler::Exact => exact_sample(&restricted_distribution(&view, &pool)?, rng),
            InnerSampler::DownUp { l, steps } => {
                let mut cur = s;
                for _ in 0..steps {
                    cur = downup_step(&view, &cur, l, Some(&pool), rng)?;
                }
                cur
            }
        };
    }
    Ok(s)
}

/// Draws `count` sparsified samples on independent streams
/// `RngStream::new(seed, i)`, in parallel, merged by index — the output is
/// identical for every thread count.
pub fn sample_batch(
    fam: &Family,
    map: &SubdivisionMap,
    cfg: &ChainConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<KSubset>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i as u64);
            sparsified_sample(fam, map, cfg, &mut rng)
        })
        .collect()
}

/// Configuration of the sampling-to-counting estimator.
#[derive(Debug, Clone)]
pub struct CountingConfig {
    /// Target relative error of the partition-function estimate.
    pub epsilon: f64,
    /// Failure probability budget.
    pub delta: f64,
    /// Exact enumeration takes over once `C(|R|, k)` drops below this.
    pub base_guard: f64,
    /// Entropic-independence parameter used for intermediate-size selection.
    pub alpha: f64,
    /// Calibration constant for [`choose_t`].
    pub c0: f64,
    /// Per-sample chain accuracy.
    pub eps_prime: f64,
}

impl Default for CountingConfig {
    fn default() -> Self {
        CountingConfig {
            epsilon: 0.1,
            delta: 0.05,
            base_guard: 1e5,
            alpha: 0.5,
            c0: 2.5,
            eps_prime: 0.05,
        }
    }
}

/// The estimate with its confidence report; the interface never returns a
/// bare number.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountReport {
    pub z_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples_used: usize,
    pub factors: usize,
}

// View of `fam` restricted to `active` ground elements, re-indexed to
// [0, |active|) so chain parameters track the shrinking ground set.
struct CompactedFamily<'a> {
    fam: &'a Family,
    active: &'a [usize],
}

impl CompactedFamily<'_> {
    fn expand(&self, s: &KSubset) -> KSubset {
        KSubset::from_sorted_unchecked(s.iter().map(|i| self.active[i]).collect())
    }
}

impl WeightedFamily for CompactedFamily<'_> {
    fn ground_size(&self) -> usize {
        self.active.len()
    }
    fn set_size(&self) -> usize {
        self.fam.set_size()
    }
    fn log_weight(&self, s: &KSubset) -> f64 {
        self.fam.log_weight(&self.expand(s))
    }
}

/// Telescoping sampling-to-counting: repeatedly remove the element with the
/// smallest estimated marginal, dividing by the estimated avoidance
/// probability `q_j = P_{mu_R}[j not in S]`, then enumerate the base case
/// exactly. Returns the estimate with a delta-method confidence interval.
pub fn count_partition_function(
    fam: &Family,
    cfg: &CountingConfig,
    rng: &mut RngStream,
) -> Result<CountReport> {
    if !(cfg.epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "epsilon = {} must be > 0",
            cfg.epsilon
        )));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta = {} outside (0, 1)",
            cfg.delta
        )));
    }
    let n = fam.ground_size();
    let k = fam.set_size();
    let mut active: Vec<usize> = (0..n).collect();
    let mut log_correction = 0.0;
    let mut var_log = 0.0;
    let mut samples_used = 0usize;
    let mut factors = 0usize;
    // per-factor accuracy budget split over the worst-case factor count
    let max_factors = n.saturating_sub(2 * k).max(1);
    let eps_f = cfg.epsilon / (2.0 * max_factors as f64);
    let per_factor = ((2.0 * (2.0 * n as f64 / cfg.delta).ln() / (eps_f * eps_f)).ceil() as usize)
        .clamp(200, 200_000);
    let mut stream = 1u64;
    while binomial(active.len(), k) > cfg.base_guard && active.len() > 2 * k {
        let compact = CompactedFamily {
            fam,
            active: &active,
        };
        let m = active.len();
        let t = choose_t(m, k, cfg.alpha, 2.0, 0.25, cfg.c0);
        let inner = if ln_binomial(t, k) <= (cfg.base_guard.max(1e4)).ln() {
            InnerSampler::Exact
        } else {
            InnerSampler::DownUp {
                l: k.min((1.0 / cfg.alpha).ceil() as usize),
                steps: default_inner_steps(k, cfg.alpha, t),
            }
        };
        let chain = ChainConfig {
            t,
            steps: default_chain_steps(cfg.eps_prime),
            inner,
            epsilon: 0.25,
            seed: rng.seed(),
            complement_trick: false,
        };
        let mut counts = vec![0u64; m];
        for _ in 0..per_factor {
            let mut sample_rng = rng.split(stream);
            stream += 1;
            let start = find_initial_state(&compact, &mut sample_rng)?;
            let s = crate::samplers::run_chain(&compact, &start, &chain, &mut sample_rng)?;
            for i in s.iter() {
                counts[i] += 1;
            }
        }
        samples_used += per_factor;
        // pivot: the compact index seen least often
        let pivot = (0..m).min_by_key(|&i| counts[i]).expect("nonempty");
        let q = 1.0 - counts[pivot] as f64 / per_factor as f64;
        if q == 0.0 {
            return Err(Error::Sampler(format!(
                "avoidance probability estimated 0 for element {} of restriction {:?}",
                active[pivot], active
            )));
        }
        log_correction -= q.ln();
        var_log += (1.0 - q) / (q * per_factor as f64);
        active.remove(pivot);
        factors += 1;
    }
    // exact unnormalized base case over the surviving restriction
    let compact = CompactedFamily {
        fam,
        active: &active,
    };
    let mut log_terms = Vec::new();
    for c in itertools::Itertools::combinations(0..active.len(), k) {
        let s = KSubset::from_sorted_unchecked(c);
        let lw = checked_log_weight(&compact, &s)?;
        if lw > f64::NEG_INFINITY {
            log_terms.push(lw);
        }
    }
    let log_base = logsumexp(&log_terms);
    if log_base == f64::NEG_INFINITY {
        return Err(Error::EmptySupport(format!(
            "base restriction {active:?} carries no weight"
        )));
    }
    let log_z = log_base + log_correction;
    let sd = var_log.sqrt();
    let zq = {
        use statrs::distribution::{ContinuousCDF, Normal};
        Normal::new(0.0, 1.0)
            .expect("standard normal")
            .inverse_cdf(1.0 - cfg.delta / 2.0)
    };
    Ok(CountReport {
        z_estimate: log_z.exp(),
        ci_low: (log_z - zq * sd).exp(),
        ci_high: (log_z + zq * sd).exp(),
        samples_used,
        factors,
    })
}

/// On-disk marginal cache tied to the family it was estimated for.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalCache {
    pub n: usize,
    pub k: usize,
    pub p: Vec<f64>,
    pub eta: f64,
    #[serde(rename = "N")]
    pub sample_count: usize,
    pub family_fingerprint: String,
}

pub fn save_marginal_cache(path: &Path, est: &MarginalEstimates, fingerprint: &str) -> Result<()> {
    let cache = MarginalCache {
        n: est.n(),
        k: est.k(),
        p: est.p().to_vec(),
        eta: est.eta(),
        sample_count: est.sample_count(),
        family_fingerprint: fingerprint.to_string(),
    };
    let text = serde_json::to_string_pretty(&cache)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Loads a cache, refusing one whose fingerprint does not match the family it
/// is about to be used with.
pub fn load_marginal_cache(path: &Path, fingerprint: &str) -> Result<MarginalEstimates> {
    let text = std::fs::read_to_string(path)?;
    let cache: MarginalCache = serde_json::from_str(&text)?;
    if cache.family_fingerprint != fingerprint {
        return Err(Error::ContractViolation(format!(
            "marginal cache at {} was built for a different family (fingerprint {} != {})",
            path.display(),
            cache.family_fingerprint,
            fingerprint
        )));
    }
    MarginalEstimates::new(cache.p, cache.k, cache.eta, cache.sample_count)
}

/// Exact marginals wrapped as estimates, for pipelines on enumerable
/// instances.
pub fn exact_marginal_estimates(fam: &dyn WeightedFamily) -> Result<MarginalEstimates> {
    MarginalEstimates::exact(enumerate(fam)?.marginals(), fam.set_size())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::tv_distance;
    use crate::dist::{subdivide, ExplicitDistribution};
    use crate::families::{make_paired, TableFamily};
    use itertools::Itertools;
    use std::collections::HashMap;
    use std::sync::Arc;

    fn skewed_table() -> Family {
        Arc::new(
            TableFamily::from_weights(4, 2, vec![(vec![0, 1], 1.0), (vec![0, 2], 1.0)]).unwrap(),
        )
    }

    #[test]
    fn estimates_satisfy_invariants_by_construction() {
        let fam = skewed_table();
        let d = enumerate(&fam).unwrap();
        let mut rng = RngStream::new(1, 0);
        let est =
            estimate_marginals(&fam, |r| Ok(exact_sample(&d, r)), 10_000, 0.5, &mut rng).unwrap();
        let total: f64 = est.p().iter().sum();
        assert!((total - 2.0).abs() < 1e-9);
        // exact marginals (1, 1/2, 1/2, 0) blended with eta = 1/2
        assert!((est.p()[0] - 0.75).abs() < 0.02);
        assert!((est.p()[3] - 0.25).abs() < 1e-12, "floored at eta*k/n");
    }

    #[test]
    fn estimate_floor_holds_for_unseen_elements() {
        let fam = skewed_table();
        let d = enumerate(&fam).unwrap();
        let mut rng = RngStream::new(2, 0);
        let est =
            estimate_marginals(&fam, |r| Ok(exact_sample(&d, r)), 50, 0.25, &mut rng).unwrap();
        for &p in est.p() {
            assert!(p >= 0.25 * 2.0 / 4.0 - 1e-12);
        }
    }

    #[test]
    fn isotropic_counts_and_size_bound() {
        let est = MarginalEstimates::new(vec![1.0, 0.5, 0.25, 0.25], 2, 0.0, 0).unwrap();
        let map = isotropic_transform(&est).unwrap();
        assert_eq!(
            (0..4).map(|i| map.count(i)).collect::<Vec<_>>(),
            vec![2, 1, 1, 1]
        );
        assert!(map.total() <= 8);
        // uniform marginals subdivide trivially
        let est = MarginalEstimates::new(vec![0.5; 4], 2, 0.5, 0).unwrap();
        let map = isotropic_transform(&est).unwrap();
        assert_eq!(map.total(), 4);
    }

    #[test]
    fn size_bound_holds_for_random_estimates() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..100 {
            let n = 3 + rng.gen_index(20);
            let k = 1 + rng.gen_index(n.min(6));
            let eta = 0.2 + 0.6 * rng.next_f64();
            let raw: Vec<f64> = (0..n).map(|_| rng.next_f64() + 1e-6).collect();
            let total: f64 = raw.iter().sum();
            let freq: Vec<f64> = raw.iter().map(|v| v * k as f64 / total).collect();
            let p: Vec<f64> = freq
                .iter()
                .map(|f| (1.0 - eta) * f + eta * k as f64 / n as f64)
                .collect();
            let est = MarginalEstimates::new(p, k, 0.0, 0).unwrap();
            let map = isotropic_transform(&est).unwrap();
            assert!(
                map.total() <= 2 * n,
                "|U| = {} > 2n = {}",
                map.total(),
                2 * n
            );
        }
    }

    #[test]
    fn subdivided_marginals_are_near_isotropic() {
        let fam = skewed_table();
        let est = exact_marginal_estimates(&fam).unwrap();
        // zero-marginal element keeps one copy; blend not needed for the check
        let map = isotropic_transform(&est).unwrap();
        let sub = subdivide(fam.clone(), map.clone()).unwrap();
        let marg = enumerate(&sub).unwrap().marginals();
        let u = map.total();
        for (flat, m) in marg.iter().enumerate() {
            let (orig, _) = map.to_original(flat);
            assert!(
                (m - est.p()[orig] / map.count(orig) as f64).abs() < 1e-12,
                "copy marginal mismatch at {flat}"
            );
            assert!(*m <= 4.0 * 2.0 / u as f64 + 1e-12);
        }
    }

    #[test]
    fn trivial_subdivision_gives_identity_field() {
        let map = SubdivisionMap::identity(5);
        let s0 = KSubset::new(vec![1, 4]).unwrap();
        let mut rng = RngStream::new(4, 0);
        let dom = draw_sparse_domain(&map, &s0, 4, &mut rng).unwrap();
        assert_eq!(dom.support.len(), 4);
        for (&i, &c) in dom.support.iter().zip(&dom.counts) {
            assert_eq!(c, 1);
            assert_eq!(dom.field.value(i), 1.0);
        }
        assert!(dom.support.contains(&1) && dom.support.contains(&4));
    }

    #[test]
    fn saturated_copies_give_unit_field() {
        let map = SubdivisionMap::new(vec![2, 1, 1]).unwrap();
        let s0 = KSubset::new(vec![0]).unwrap();
        // draw the second copy of 0 explicitly
        let dom = domain_from_copy_draw(&map, &s0, &[1]).unwrap();
        assert_eq!(dom.support, vec![0]);
        assert_eq!(dom.counts, vec![2]);
        assert_eq!(dom.field.value(0), 1.0);
    }

    // Exact original-space law of "draw T, downsample the fielded
    // restriction", averaged over all T draws.
    fn averaged_law(
        fam: &Family,
        map: &SubdivisionMap,
        s0: &KSubset,
        t: usize,
    ) -> ExplicitDistribution {
        let total = map.total();
        let designated: Vec<usize> = s0.iter().map(|i| map.to_flat(i, 0)).collect();
        let pool_flats: Vec<usize> = (0..total).filter(|f| !designated.contains(f)).collect();
        let mut acc: HashMap<KSubset, f64> = HashMap::new();
        let draws: Vec<Vec<usize>> = pool_flats
            .iter()
            .copied()
            .combinations(t - s0.len())
            .collect();
        let w = 1.0 / draws.len() as f64;
        for drawn in draws {
            let dom = domain_from_copy_draw(map, s0, &drawn).unwrap();
            let view = apply_external_field(fam.clone(), dom.field.clone()).unwrap();
            let d = restricted_distribution(&view, &dom.support_set()).unwrap();
            for (s, p) in d.entries() {
                *acc.entry(s.clone()).or_insert(0.0) += w * p;
            }
        }
        ExplicitDistribution::from_probabilities(
            fam.ground_size(),
            fam.set_size(),
            acc.into_iter().collect(),
        )
        .unwrap()
    }

    // Same law computed on the materialized subdivided family.
    fn subdivided_law(
        fam: &Family,
        map: &SubdivisionMap,
        s0: &KSubset,
        t: usize,
    ) -> ExplicitDistribution {
        let sub = subdivide(fam.clone(), map.clone()).unwrap();
        let total = map.total();
        let designated: Vec<usize> = s0.iter().map(|i| map.to_flat(i, 0)).collect();
        let pool_flats: Vec<usize> = (0..total).filter(|f| !designated.contains(f)).collect();
        let mut acc: HashMap<KSubset, f64> = HashMap::new();
        let draws: Vec<Vec<usize>> = pool_flats
            .iter()
            .copied()
            .combinations(t - s0.len())
            .collect();
        let w = 1.0 / draws.len() as f64;
        for drawn in draws {
            let mut flats: Vec<usize> = designated.iter().copied().chain(drawn).collect();
            flats.sort_unstable();
            let pool = KSubset::from_sorted_unchecked(flats);
            let d = restricted_distribution(&sub, &pool).unwrap();
            for (copy_set, p) in d.entries() {
                let orig = sub.originals(copy_set).expect("supported copy-set");
                *acc.entry(orig).or_insert(0.0) += w * p;
            }
        }
        ExplicitDistribution::from_probabilities(
            fam.ground_size(),
            fam.set_size(),
            acc.into_iter().collect(),
        )
        .unwrap()
    }

    #[test]
    fn sparse_domain_law_matches_materialized_subdivision() {
        let fam: Family = Arc::new(
            TableFamily::from_weights(3, 1, vec![(vec![0], 1.0), (vec![1], 2.0), (vec![2], 4.0)])
                .unwrap(),
        );
        let map = SubdivisionMap::new(vec![2, 1, 3]).unwrap();
        let s0 = KSubset::new(vec![0]).unwrap();
        for t in 2..=4 {
            let a = averaged_law(&fam, &map, &s0, t);
            let b = subdivided_law(&fam, &map, &s0, t);
            assert!(tv_distance(&a, &b).unwrap() < 1e-12, "t = {t}");
        }
        // a k = 2 instance
        let fam2 = skewed_table();
        let map2 = SubdivisionMap::new(vec![2, 1, 2, 1]).unwrap();
        let s02 = KSubset::new(vec![0, 1]).unwrap();
        for t in 4..=5 {
            let a = averaged_law(&fam2, &map2, &s02, t);
            let b = subdivided_law(&fam2, &map2, &s02, t);
            assert!(tv_distance(&a, &b).unwrap() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn full_t_sparsified_sample_is_exact() {
        let fam = skewed_table();
        let mu = enumerate(&fam).unwrap();
        let est = exact_marginal_estimates(&fam).unwrap();
        let map = isotropic_transform(&est).unwrap();
        let cfg = ChainConfig {
            t: map.total(),
            steps: 1,
            inner: InnerSampler::Exact,
            epsilon: 0.25,
            seed: 0,
            complement_trick: false,
        };
        let mut rng = RngStream::new(5, 0);
        let mut countmap: HashMap<KSubset, usize> = HashMap::new();
        let draws = 40_000;
        for _ in 0..draws {
            *countmap
                .entry(sparsified_sample(&fam, &map, &cfg, &mut rng).unwrap())
                .or_insert(0) += 1;
        }
        let emp = ExplicitDistribution::from_probabilities(
            4,
            2,
            countmap
                .into_iter()
                .map(|(s, c)| (s, c as f64 / draws as f64))
                .collect(),
        )
        .unwrap();
        assert!(tv_distance(&emp, &mu).unwrap() < 0.01);
    }

    #[test]
    fn batches_are_deterministic_and_parallel_safe() {
        let fam: Family = Arc::new(make_paired(8).unwrap());
        let est = exact_marginal_estimates(&fam).unwrap();
        let map = isotropic_transform(&est).unwrap();
        let cfg = ChainConfig {
            t: 6,
            steps: 3,
            inner: InnerSampler::Exact,
            epsilon: 0.25,
            seed: 0,
            complement_trick: false,
        };
        let a = sample_batch(&fam, &map, &cfg, 200, 77).unwrap();
        let b = sample_batch(&fam, &map, &cfg, 200, 77).unwrap();
        assert_eq!(a, b);
        // and equal to the serial evaluation
        for (i, s) in a.iter().enumerate() {
            let mut rng = RngStream::new(77, i as u64);
            assert_eq!(*s, sparsified_sample(&fam, &map, &cfg, &mut rng).unwrap());
        }
    }

    #[test]
    fn counting_hits_exact_base_case() {
        let fam: Family = Arc::new(
            TableFamily::from_weights(
                4,
                2,
                vec![(vec![0, 1], 2.0), (vec![1, 2], 3.0), (vec![2, 3], 5.0)],
            )
            .unwrap(),
        );
        let mut rng = RngStream::new(6, 0);
        let report = count_partition_function(&fam, &CountingConfig::default(), &mut rng).unwrap();
        assert!((report.z_estimate - 10.0).abs() < 1e-9);
        assert_eq!(report.factors, 0);
        assert_eq!(report.samples_used, 0);
    }

    #[test]
    fn counting_through_the_sampling_path() {
        let fam: Family = Arc::new(TableFamily::uniform(8, 2).unwrap());
        let cfg = CountingConfig {
            epsilon: 0.3,
            base_guard: 16.0, // force C(8,2) = 28 through the telescoping path
            ..CountingConfig::default()
        };
        let mut rng = RngStream::new(7, 0);
        let report = count_partition_function(&fam, &cfg, &mut rng).unwrap();
        assert!(report.factors >= 1);
        assert!(report.samples_used > 0);
        let z = report.z_estimate;
        assert!((z - 28.0).abs() / 28.0 < 0.15, "Z estimate {z}");
        assert!(report.ci_low <= z && z <= report.ci_high);
    }

    #[test]
    fn counting_rejects_bad_parameters() {
        let fam: Family = Arc::new(TableFamily::uniform(4, 2).unwrap());
        let mut rng = RngStream::new(8, 0);
        let bad = CountingConfig {
            epsilon: 0.0,
            ..CountingConfig::default()
        };
        assert!(count_partition_function(&fam, &bad, &mut rng).is_err());
    }

    #[test]
    fn marginal_cache_roundtrip_and_fingerprint_guard() {
        let est = MarginalEstimates::new(vec![0.5; 4], 2, 0.5, 123).unwrap();
        let dir = std::env::temp_dir().join(format!("sparsedom-cache-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cache.json");
        save_marginal_cache(&path, &est, "abc123").unwrap();
        let loaded = load_marginal_cache(&path, "abc123").unwrap();
        assert_eq!(loaded.p(), est.p());
        assert_eq!(loaded.sample_count(), 123);
        assert!(load_marginal_cache(&path, "other").is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
