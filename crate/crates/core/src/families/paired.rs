use crate::dist::{KSubset, WeightedFamily};
use crate::rng::RngStream;
use crate::{Error, Result};

/// The paired hard instance: uniform over the `n/2` pairs `{i, n/2 + i}`.
/// Isotropic and 1/2-fractionally-log-concave; the separator between the
/// worst-case and average-case intermediate-sampling analyses.
pub struct PairedFamily {
    n: usize,
}

pub fn make_paired(n: usize) -> Result<PairedFamily> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::invalid(format!(
            "paired instance needs even n >= 2, got {n}"
        )));
    }
    Ok(PairedFamily { n })
}

impl WeightedFamily for PairedFamily {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn set_size(&self) -> usize {
        2
    }

    fn log_weight(&self, s: &KSubset) -> f64 {
        let idx = s.as_slice();
        if idx.len() == 2 && idx[1] == idx[0] + self.n / 2 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn support_sample(&self, rng: &mut RngStream) -> Option<KSubset> {
        let i = rng.gen_index(self.n / 2);
        Some(KSubset::from_sorted_unchecked(vec![i, i + self.n / 2]))
    }
}
