use crate::dist::{Family, KSubset, WeightedFamily};
use crate::rng::RngStream;
use crate::{Error, Result};

/// `mu(S) ∝ mu0(S) * 1[|S ∩ A_i| = k_i for all i]`: a base measure with fixed
/// per-block cardinalities.
pub struct PartitionConstrainedFamily {
    base: Family,
    quotas: Vec<usize>,
    block_of: Vec<usize>,
}

pub fn make_partition_constrained(
    base: Family,
    blocks: Vec<Vec<usize>>,
    quotas: Vec<usize>,
) -> Result<PartitionConstrainedFamily> {
    let n = base.ground_size();
    if blocks.len() != quotas.len() {
        return Err(Error::invalid(format!(
            "{} blocks but {} quotas",
            blocks.len(),
            quotas.len()
        )));
    }
    if quotas.iter().sum::<usize>() != base.set_size() {
        return Err(Error::invalid(format!(
            "quotas sum to {}, set size is {}",
            quotas.iter().sum::<usize>(),
            base.set_size()
        )));
    }
    let mut block_of = vec![usize::MAX; n];
    let mut covered = 0usize;
    for (bi, block) in blocks.iter().enumerate() {
        for &e in block {
            if e >= n {
                return Err(Error::invalid(format!("block element {e} out of [0, {n})")));
            }
            if block_of[e] != usize::MAX {
                return Err(Error::invalid(format!("element {e} in two blocks")));
            }
            block_of[e] = bi;
            covered += 1;
        }
    }
    if covered != n {
        return Err(Error::invalid("blocks must partition the ground set"));
    }
    Ok(PartitionConstrainedFamily {
        base,
        quotas,
        block_of,
    })
}

impl PartitionConstrainedFamily {
    fn satisfies_quotas(&self, s: &KSubset) -> bool {
        let mut counts = vec![0usize; self.quotas.len()];
        for e in s.iter() {
            counts[self.block_of[e]] += 1;
        }
        counts == self.quotas
    }
}

impl WeightedFamily for PartitionConstrainedFamily {
    fn ground_size(&self) -> usize {
        self.base.ground_size()
    }

    fn set_size(&self) -> usize {
        self.base.set_size()
    }

    fn log_weight(&self, s: &KSubset) -> f64 {
        if self.satisfies_quotas(s) {
            self.base.log_weight(s)
        } else {
            f64::NEG_INFINITY
        }
    }

    fn support_sample(&self, rng: &mut RngStream) -> Option<KSubset> {
        // Filtered delegation; infeasible quotas fall through to enumeration.
        for _ in 0..64 {
            if let Some(s) = self.base.support_sample(rng) {
                if self.satisfies_quotas(&s) {
                    return Some(s);
                }
            }
        }
        None
    }
}
