use std::collections::HashMap;
use std::sync::Mutex;

use crate::dist::{KSubset, WeightedFamily};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Exact perfect-matching counting is limited to this many vertices; beyond
/// that the bitmask dynamic program stops being desk-scale.
pub const MAX_MATCHING_VERTICES: usize = 24;

/// Graph plus the number of edges `k` in a k-matching; weight oracles operate
/// on vertex sets of size `2k`.
#[derive(Debug, Clone)]
pub struct MatchingSpec {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub k: usize,
}

/// mu over `C(V, 2k)` with `mu(S)` proportional to the number of perfect
/// matchings of the induced subgraph `G[S]`.
pub struct MatchingFamily {
    vertices: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<u32>, // bitmask adjacency over <= 24 vertices
    k: usize,
    memo: Mutex<HashMap<(Vec<usize>, u32), u64>>,
}

pub fn make_matchings(spec: MatchingSpec) -> Result<MatchingFamily> {
    if spec.vertices > MAX_MATCHING_VERTICES {
        return Err(Error::TooLarge(format!(
            "{} vertices; exact matching counts support at most {MAX_MATCHING_VERTICES}",
            spec.vertices
        )));
    }
    if 2 * spec.k > spec.vertices {
        return Err(Error::invalid(format!(
            "set size {} exceeds vertex count {}",
            2 * spec.k,
            spec.vertices
        )));
    }
    let mut adj = vec![0u32; spec.vertices];
    let mut edges = Vec::new();
    for &(a, b) in &spec.edges {
        if a >= spec.vertices || b >= spec.vertices || a == b {
            return Err(Error::Construction(format!("bad edge ({a}, {b})")));
        }
        if adj[a] & (1 << b) == 0 {
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
            edges.push((a.min(b), a.max(b)));
        }
    }
    Ok(MatchingFamily {
        vertices: spec.vertices,
        edges,
        adj,
        k: spec.k,
        memo: Mutex::new(HashMap::new()),
    })
}

impl MatchingFamily {
    /// Number of perfect matchings of the subgraph induced on `s`.
    pub fn perfect_matchings(&self, s: &KSubset) -> u64 {
        let verts: Vec<usize> = s.iter().collect();
        if verts.len() % 2 != 0 {
            return 0;
        }
        // local adjacency over positions in `verts`
        let local: Vec<u32> = verts
            .iter()
            .map(|&v| {
                let mut m = 0u32;
                for (pos, &u) in verts.iter().enumerate() {
                    if self.adj[v] & (1 << u) != 0 {
                        m |= 1 << pos;
                    }
                }
                m
            })
            .collect();
        let full = if verts.len() == 32 {
            u32::MAX
        } else {
            (1u32 << verts.len()) - 1
        };
        let mut memo = self.memo.lock().unwrap();
        count_pm(&local, full, &verts, &mut memo)
    }
}

fn count_pm(
    local: &[u32],
    mask: u32,
    key_verts: &[usize],
    memo: &mut HashMap<(Vec<usize>, u32), u64>,
) -> u64 {
    if mask == 0 {
        return 1;
    }
    let key = (key_verts.to_vec(), mask);
    if let Some(&c) = memo.get(&key) {
        return c;
    }
    let v = mask.trailing_zeros() as usize;
    let rest = mask & !(1 << v);
    let mut total = 0u64;
    let mut nbrs = local[v] & rest;
    while nbrs != 0 {
        let u = nbrs.trailing_zeros() as usize;
        nbrs &= nbrs - 1;
        total += count_pm(local, rest & !(1 << u), key_verts, memo);
    }
    memo.insert(key, total);
    total
}

impl WeightedFamily for MatchingFamily {
    fn ground_size(&self) -> usize {
        self.vertices
    }

    fn set_size(&self) -> usize {
        2 * self.k
    }

    fn log_weight(&self, s: &KSubset) -> f64 {
        let c = self.perfect_matchings(s);
        if c == 0 {
            f64::NEG_INFINITY
        } else {
            (c as f64).ln()
        }
    }

    fn support_sample(&self, rng: &mut RngStream) -> Option<KSubset> {
        // A union of k disjoint edges always has at least one perfect matching.
        for _ in 0..32 {
            let mut order: Vec<usize> = (0..self.edges.len()).collect();
            rng.shuffle(&mut order);
            let mut used = 0u32;
            let mut verts = Vec::with_capacity(2 * self.k);
            for e in order {
                let (a, b) = self.edges[e];
                if used & (1 << a) == 0 && used & (1 << b) == 0 {
                    used |= (1 << a) | (1 << b);
                    verts.push(a);
                    verts.push(b);
                    if verts.len() == 2 * self.k {
                        return KSubset::new(verts).ok();
                    }
                }
            }
        }
        None
    }
}
