use crate::dist::{Family, KSubset, WeightedFamily};
use crate::rng::RngStream;
use crate::{Error, Result};

/// The blow-up of mu by factor `m`: every element is replaced by a group of
/// `m` perfectly correlated copies, so a set has finite weight iff it is
/// exactly a union of full copy-groups of a finite-weight set of mu, with the
/// same weight. Copies of element `i` occupy flat indices `[i*m, (i+1)*m)`.
pub struct BlowupFamily {
    base: Family,
    m: usize,
}

pub fn make_blowup(base: Family, m: usize) -> Result<BlowupFamily> {
    if m == 0 {
        return Err(Error::invalid("blow-up factor must be >= 1"));
    }
    Ok(BlowupFamily { base, m })
}

impl BlowupFamily {
    pub fn factor(&self) -> usize {
        self.m
    }

    /// Contracts a blown-up set to originals; `None` unless it is exactly a
    /// union of full copy-groups.
    pub fn contract(&self, s: &KSubset) -> Option<KSubset> {
        if s.len() != self.m * self.base.set_size() {
            return None;
        }
        let mut originals = Vec::with_capacity(self.base.set_size());
        let flats = s.as_slice();
        let mut pos = 0;
        while pos < flats.len() {
            let orig = flats[pos] / self.m;
            // full group = m consecutive flats starting at orig * m
            for j in 0..self.m {
                if pos + j >= flats.len() || flats[pos + j] != orig * self.m + j {
                    return None;
                }
            }
            originals.push(orig);
            pos += self.m;
        }
        Some(KSubset::from_sorted_unchecked(originals))
    }
}

impl WeightedFamily for BlowupFamily {
    fn ground_size(&self) -> usize {
        self.m * self.base.ground_size()
    }

    fn set_size(&self) -> usize {
        self.m * self.base.set_size()
    }

    fn log_weight(&self, s: &KSubset) -> f64 {
        match self.contract(s) {
            Some(orig) => self.base.log_weight(&orig),
            None => f64::NEG_INFINITY,
        }
    }

    fn support_sample(&self, rng: &mut RngStream) -> Option<KSubset> {
        let orig = self.base.support_sample(rng)?;
        let mut flats = Vec::with_capacity(self.set_size());
        for i in orig.iter() {
            for j in 0..self.m {
                flats.push(i * self.m + j);
            }
        }
        Some(KSubset::from_sorted_unchecked(flats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::TableFamily;
    use std::sync::Arc;

    fn singletons(n: usize) -> Family {
        Arc::new(
            TableFamily::from_log_weights(n, 1, (0..n).map(|i| (vec![i], 0.0)).collect()).unwrap(),
        )
    }

    #[test]
    fn m1_is_isomorphic() {
        let base = singletons(3);
        let b = make_blowup(base.clone(), 1).unwrap();
        let s = KSubset::new(vec![1]).unwrap();
        assert_eq!(b.log_weight(&s), base.log_weight(&s));
    }

    #[test]
    fn paired_instance_from_singleton_blowup() {
        // uniform singletons of [2], m = 2 -> uniform on {{0,1},{2,3}}
        let b = make_blowup(singletons(2), 2).unwrap();
        assert_eq!(b.ground_size(), 4);
        assert_eq!(b.set_size(), 2);
        assert!(b.log_weight(&KSubset::new(vec![0, 1]).unwrap()).is_finite());
        assert!(b.log_weight(&KSubset::new(vec![2, 3]).unwrap()).is_finite());
        assert_eq!(
            b.log_weight(&KSubset::new(vec![0, 2]).unwrap()),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn partial_groups_are_zero_weight() {
        let b = make_blowup(singletons(3), 3).unwrap();
        // mixes copies of originals 0 and 1
        assert_eq!(
            b.log_weight(&KSubset::new(vec![0, 1, 3]).unwrap()),
            f64::NEG_INFINITY
        );
        assert!(b
            .log_weight(&KSubset::new(vec![3, 4, 5]).unwrap())
            .is_finite());
    }
}
