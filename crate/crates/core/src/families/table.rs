use std::collections::BTreeMap;

use crate::dist::{KSubset, WeightedFamily};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Arbitrary mu given by an explicit log-weight table; the workhorse for
/// oracle tests. Sets absent from the table have weight zero.
pub struct TableFamily {
    n: usize,
    k: usize,
    table: BTreeMap<KSubset, f64>,
    keys: Vec<KSubset>,
}

impl TableFamily {
    pub fn from_log_weights(n: usize, k: usize, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (idx, lw) in entries {
            if lw.is_nan() {
                return Err(Error::NanWeight(format!("{idx:?}")));
            }
            let s = KSubset::new(idx)?;
            if s.len() != k {
                return Err(Error::invalid(format!(
                    "table entry of size {} in a k={k} family",
                    s.len()
                )));
            }
            s.validate_ground(n)?;
            if table.insert(s, lw).is_some() {
                return Err(Error::invalid("duplicate set in table"));
            }
        }
        let keys: Vec<KSubset> = table
            .iter()
            .filter(|(_, lw)| lw.is_finite())
            .map(|(s, _)| s.clone())
            .collect();
        if keys.is_empty() {
            return Err(Error::EmptySupport("table has no finite entry".to_string()));
        }
        Ok(TableFamily { n, k, table, keys })
    }

    /// Positive weights on plain scale.
    pub fn from_weights(n: usize, k: usize, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let logs = entries
            .into_iter()
            .map(|(s, w)| {
                if w < 0.0 {
                    Err(Error::invalid(format!("negative weight {w}")))
                } else {
                    Ok((s, w.ln()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        TableFamily::from_log_weights(n, k, logs)
    }

    /// Uniform distribution over all of `C([n], k)`.
    pub fn uniform(n: usize, k: usize) -> Result<Self> {
        use itertools::Itertools;
        let entries = (0..n).combinations(k).map(|c| (c, 0.0)).collect::<Vec<_>>();
        TableFamily::from_log_weights(n, k, entries)
    }
}

impl WeightedFamily for TableFamily {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn set_size(&self) -> usize {
        self.k
    }

    fn log_weight(&self, s: &KSubset) -> f64 {
        *self.table.get(s).unwrap_or(&f64::NEG_INFINITY)
    }

    fn support_sample(&self, rng: &mut RngStream) -> Option<KSubset> {
        Some(self.keys[rng.gen_index(self.keys.len())].clone())
    }
}
