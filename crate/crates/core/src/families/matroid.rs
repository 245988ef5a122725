use crate::dist::{KSubset, WeightedFamily};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Partition or graphic matroid description. Ground elements are block
/// members (partition) or edges (graphic); bases carry weight 1.
#[derive(Debug, Clone)]
pub enum MatroidSpec {
    /// Disjoint blocks covering `[n]`, with per-block quotas summing to `k`.
    Partition {
        blocks: Vec<Vec<usize>>,
        quotas: Vec<usize>,
    },
    /// Connected simple graph; bases are spanning trees, `k = |V| - 1`.
    Graphic {
        vertices: usize,
        edges: Vec<(usize, usize)>,
    },
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Uniform distribution over the bases of a partition or graphic matroid.
pub struct MatroidFamily {
    spec: MatroidSpec,
    n: usize,
    k: usize,
    /// For partition: block id of each element.
    block_of: Vec<usize>,
}

pub fn make_matroid(spec: MatroidSpec) -> Result<MatroidFamily> {
    match &spec {
        MatroidSpec::Partition { blocks, quotas } => {
            if blocks.len() != quotas.len() {
                return Err(Error::Construction(format!(
                    "{} blocks but {} quotas",
                    blocks.len(),
                    quotas.len()
                )));
            }
            let n: usize = blocks.iter().map(|b| b.len()).sum();
            let mut block_of = vec![usize::MAX; n];
            for (bi, block) in blocks.iter().enumerate() {
                for &e in block {
                    if e >= n {
                        return Err(Error::Construction(format!(
                            "element {e} outside ground [0, {n})"
                        )));
                    }
                    if block_of[e] != usize::MAX {
                        return Err(Error::Construction(format!(
                            "element {e} appears in two blocks"
                        )));
                    }
                    block_of[e] = bi;
                }
            }
            // disjoint + total size n implies covering
            let k = quotas.iter().sum();
            Ok(MatroidFamily {
                spec,
                n,
                k,
                block_of,
            })
        }
        MatroidSpec::Graphic { vertices, edges } => {
            let v = *vertices;
            for &(a, b) in edges {
                if a >= v || b >= v || a == b {
                    return Err(Error::Construction(format!("bad edge ({a}, {b})")));
                }
            }
            let mut uf = UnionFind::new(v);
            let mut components = v;
            for &(a, b) in edges {
                if uf.union(a, b) {
                    components -= 1;
                }
            }
            if components != 1 {
                return Err(Error::Construction(format!(
                    "graph has {components} components; spanning trees need a connected graph"
                )));
            }
            let n = edges.len();
            let k = v - 1;
            Ok(MatroidFamily {
                spec,
                n,
                k,
                block_of: Vec::new(),
            })
        }
    }
}

impl MatroidFamily {
    fn is_basis(&self, s: &KSubset) -> bool {
        if s.len() != self.k {
            return false;
        }
        match &self.spec {
            MatroidSpec::Partition { quotas, .. } => {
                let mut counts = vec![0usize; quotas.len()];
                for e in s.iter() {
                    counts[self.block_of[e]] += 1;
                }
                counts == *quotas
            }
            MatroidSpec::Graphic { vertices, edges } => {
                let mut uf = UnionFind::new(*vertices);
                for e in s.iter() {
                    let (a, b) = edges[e];
                    if !uf.union(a, b) {
                        return false; // cycle
                    }
                }
                true // acyclic with |V|-1 edges spans
            }
        }
    }
}

impl WeightedFamily for MatroidFamily {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn set_size(&self) -> usize {
        self.k
    }

    fn log_weight(&self, s: &KSubset) -> f64 {
        if self.is_basis(s) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn support_sample(&self, rng: &mut RngStream) -> Option<KSubset> {
        match &self.spec {
            MatroidSpec::Partition { blocks, quotas } => {
                let mut out = Vec::with_capacity(self.k);
                for (block, &q) in blocks.iter().zip(quotas) {
                    if q > block.len() {
                        return None; // infeasible quota: empty support
                    }
                    let mut pool = block.clone();
                    rng.shuffle(&mut pool);
                    out.extend_from_slice(&pool[..q]);
                }
                KSubset::new(out).ok()
            }
            MatroidSpec::Graphic { vertices, edges } => {
                // Random tree growth: a random acyclic edge order cannot
                // dead-end on a connected graph.
                let mut order: Vec<usize> = (0..edges.len()).collect();
                rng.shuffle(&mut order);
                let mut uf = UnionFind::new(*vertices);
                let mut picked = Vec::with_capacity(self.k);
                for e in order {
                    let (a, b) = edges[e];
                    if uf.union(a, b) {
                        picked.push(e);
                        if picked.len() == self.k {
                            break;
                        }
                    }
                }
                KSubset::new(picked).ok()
            }
        }
    }
}

/// Edge list of the complete graph on `v` vertices, in lexicographic order.
pub fn complete_graph_edges(v: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(v * (v - 1) / 2);
    for a in 0..v {
        for b in (a + 1)..v {
            edges.push((a, b));
        }
    }
    edges
}
