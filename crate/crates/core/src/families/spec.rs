//! JSON family specification: the on-disk description consumed by the CLI.
//!
//! Format: an object `{"family": <name>, ...family-specific fields..., "seed": N}`.
//! Parsing is strict; unknown keys are rejected. The fingerprint is a SHA-256
//! digest of the canonical serialization and ties marginal caches to the
//! family they were estimated for.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    make_blowup, make_dpp, make_matchings, make_matroid, make_paired, make_partition_constrained,
    make_reed_solomon, MatchingSpec, MatroidSpec, ReedSolomonSpec, TableFamily,
};
use crate::dist::Family;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub set: Vec<usize>,
    pub weight: f64,
}

/// Parsed family specification. The `family` tag selects the variant; every
/// variant carries a mandatory `seed`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    Table {
        n: usize,
        k: usize,
        entries: Vec<TableEntry>,
        seed: u64,
    },
    Dpp {
        /// Kernel rows, row-major.
        l: Vec<Vec<f64>>,
        k: usize,
        seed: u64,
    },
    Matroid {
        kind: MatroidKindSpec,
        seed: u64,
    },
    Matchings {
        vertices: usize,
        edges: Vec<(usize, usize)>,
        k: usize,
        seed: u64,
    },
    Blowup {
        base: Box<FamilySpec>,
        m: usize,
        seed: u64,
    },
    Paired {
        n: usize,
        seed: u64,
    },
    ReedSolomon {
        q: u64,
        k: usize,
        d: usize,
        points: Vec<u64>,
        seed: u64,
    },
    PartitionConstrained {
        base: Box<FamilySpec>,
        blocks: Vec<Vec<usize>>,
        quotas: Vec<usize>,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatroidKindSpec {
    Partition {
        blocks: Vec<Vec<usize>>,
        quotas: Vec<usize>,
    },
    Graphic {
        vertices: usize,
        edges: Vec<(usize, usize)>,
    },
}

impl FamilySpec {
    /// Strict parse: unknown keys anywhere in the document are an error.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        Self::from_value(&value)
    }

    fn from_value(value: &serde_json::Value) -> Result<Self> {
        // Internally-tagged enums tolerate unknown fields; reject them by
        // checking that re-serialization reproduces every input key.
        let spec: FamilySpec = serde_json::from_value(value.clone())?;
        let canon = serde_json::to_value(&spec)?;
        check_no_extra_keys(value, &canon, "")?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("family specs serialize")
    }

    /// SHA-256 of the canonical compact serialization, hex-encoded.
    pub fn fingerprint(&self) -> String {
        let canon = serde_json::to_string(self).expect("family specs serialize");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seed(&self) -> u64 {
        match self {
            FamilySpec::Table { seed, .. }
            | FamilySpec::Dpp { seed, .. }
            | FamilySpec::Matroid { seed, .. }
            | FamilySpec::Matchings { seed, .. }
            | FamilySpec::Blowup { seed, .. }
            | FamilySpec::Paired { seed, .. }
            | FamilySpec::ReedSolomon { seed, .. }
            | FamilySpec::PartitionConstrained { seed, .. } => *seed,
        }
    }

    /// Instantiates the weight oracle this spec describes.
    pub fn build(&self) -> Result<Family> {
        match self {
            FamilySpec::Table { n, k, entries, .. } => {
                let rows = entries.iter().map(|e| (e.set.clone(), e.weight)).collect();
                Ok(Arc::new(TableFamily::from_weights(*n, *k, rows)?))
            }
            FamilySpec::Dpp { l, k, .. } => {
                let n = l.len();
                if l.iter().any(|row| row.len() != n) {
                    return Err(Error::invalid("kernel rows must all have length n"));
                }
                let flat: Vec<f64> = l.iter().flatten().copied().collect();
                let m = DMatrix::from_row_slice(n, n, &flat);
                Ok(Arc::new(make_dpp(m, *k)?))
            }
            FamilySpec::Matroid { kind, .. } => {
                let spec = match kind {
                    MatroidKindSpec::Partition { blocks, quotas } => MatroidSpec::Partition {
                        blocks: blocks.clone(),
                        quotas: quotas.clone(),
                    },
                    MatroidKindSpec::Graphic { vertices, edges } => MatroidSpec::Graphic {
                        vertices: *vertices,
                        edges: edges.clone(),
                    },
                };
                Ok(Arc::new(make_matroid(spec)?))
            }
            FamilySpec::Matchings {
                vertices, edges, k, ..
            } => Ok(Arc::new(make_matchings(MatchingSpec {
                vertices: *vertices,
                edges: edges.clone(),
                k: *k,
            })?)),
            FamilySpec::Blowup { base, m, .. } => Ok(Arc::new(make_blowup(base.build()?, *m)?)),
            FamilySpec::Paired { n, .. } => Ok(Arc::new(make_paired(*n)?)),
            FamilySpec::ReedSolomon {
                q,
                k,
                d,
                points,
                seed,
            } => Ok(Arc::new(make_reed_solomon(ReedSolomonSpec {
                q: *q,
                k: *k,
                d: *d,
                points: points.clone(),
                seed: *seed,
            })?)),
            FamilySpec::PartitionConstrained {
                base,
                blocks,
                quotas,
                ..
            } => Ok(Arc::new(make_partition_constrained(
                base.build()?,
                blocks.clone(),
                quotas.clone(),
            )?)),
        }
    }
}

fn check_no_extra_keys(
    input: &serde_json::Value,
    canon: &serde_json::Value,
    path: &str,
) -> Result<()> {
    match (input, canon) {
        (serde_json::Value::Object(inp), serde_json::Value::Object(can)) => {
            for (key, sub) in inp {
                match can.get(key) {
                    Some(csub) => check_no_extra_keys(sub, csub, &format!("{path}/{key}"))?,
                    None => {
                        return Err(Error::invalid(format!(
                            "unknown field \"{path}/{key}\" in family spec"
                        )))
                    }
                }
            }
            Ok(())
        }
        (serde_json::Value::Array(inp), serde_json::Value::Array(can)) => {
            for (i, (sub, csub)) in inp.iter().zip(can).enumerate() {
                check_no_extra_keys(sub, csub, &format!("{path}/{i}"))?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::WeightedFamily;

    #[test]
    fn paired_roundtrip() {
        let text = r#"{"family": "paired", "n": 8, "seed": 3}"#;
        let spec = FamilySpec::from_json(text).unwrap();
        let fam = spec.build().unwrap();
        assert_eq!(fam.ground_size(), 8);
        assert_eq!(fam.set_size(), 2);
    }

    #[test]
    fn unknown_field_rejected() {
        let text = r#"{"family": "paired", "n": 8, "seed": 3, "oops": 1}"#;
        assert!(FamilySpec::from_json(text).is_err());
    }

    #[test]
    fn missing_seed_rejected() {
        let text = r#"{"family": "paired", "n": 8}"#;
        assert!(FamilySpec::from_json(text).is_err());
    }

    #[test]
    fn fingerprint_distinguishes_specs() {
        let a = FamilySpec::from_json(r#"{"family": "paired", "n": 8, "seed": 3}"#).unwrap();
        let b = FamilySpec::from_json(r#"{"family": "paired", "n": 10, "seed": 3}"#).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.fingerprint());
    }

    #[test]
    fn nested_blowup_builds() {
        let text = r#"{
            "family": "blowup",
            "base": {"family": "table", "n": 2, "k": 1,
                     "entries": [{"set": [0], "weight": 1.0}, {"set": [1], "weight": 1.0}],
                     "seed": 0},
            "m": 2,
            "seed": 0
        }"#;
        let fam = FamilySpec::from_json(text).unwrap().build().unwrap();
        assert_eq!(fam.ground_size(), 4);
        assert_eq!(fam.set_size(), 2);
    }

    #[test]
    fn dpp_matrix_row_major() {
        let text = r#"{"family": "dpp", "l": [[1.0, 0.0], [0.0, 3.0]], "k": 1, "seed": 0}"#;
        let fam = FamilySpec::from_json(text).unwrap().build().unwrap();
        assert_eq!(fam.ground_size(), 2);
    }
}
