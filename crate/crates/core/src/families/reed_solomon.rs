use crate::dist::{KSubset, WeightedFamily};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Reed-Solomon lower-bound instance: uniform over sets
/// `{(x_i, y_i) : i in [k]}` such that `p(x_i) = pi_i(y_i)` for some
/// polynomial `p` over `F_q` of degree at most `d`, with per-coordinate random
/// permutations `pi_i`. Ground set is `{x_1..x_k} x F_q`, flattened so block
/// `i` occupies `[i*q, (i+1)*q)`.
#[derive(Debug, Clone)]
pub struct ReedSolomonSpec {
    pub q: u64,
    pub k: usize,
    pub d: usize,
    pub points: Vec<u64>,
    pub seed: u64,
}

pub struct ReedSolomonFamily {
    q: u64,
    k: usize,
    d: usize,
    points: Vec<u64>,
    perms: Vec<Vec<u64>>,     // perms[i][y] = pi_i(y)
    inv_perms: Vec<Vec<u64>>, // inv_perms[i][w] = pi_i^{-1}(w)
}

fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut f = 2u64;
    while f * f <= q {
        if q % f == 0 {
            return false;
        }
        f += 1;
    }
    true
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

fn inv_mod(a: u64, q: u64) -> u64 {
    pow_mod(a, q - 2, q)
}

pub fn make_reed_solomon(spec: ReedSolomonSpec) -> Result<ReedSolomonFamily> {
    let ReedSolomonSpec {
        q,
        k,
        d,
        points,
        seed,
    } = spec;
    if !is_prime(q) {
        return Err(Error::invalid(format!("q = {q} is not prime")));
    }
    if d + 1 > k {
        return Err(Error::invalid(format!(
            "need d + 1 <= k, got d = {d}, k = {k}"
        )));
    }
    if points.len() != k {
        return Err(Error::invalid(format!(
            "{} evaluation points for k = {k} blocks",
            points.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for &x in &points {
        if x >= q || !seen.insert(x) {
            return Err(Error::invalid(format!(
                "evaluation points must be distinct elements of F_{q}"
            )));
        }
    }
    // seeded Fisher-Yates, one stream per coordinate
    let mut perms = Vec::with_capacity(k);
    let mut inv_perms = Vec::with_capacity(k);
    for i in 0..k {
        let mut rng = RngStream::new(seed, i as u64);
        let mut p: Vec<u64> = (0..q).collect();
        rng.shuffle(&mut p);
        let mut inv = vec![0u64; q as usize];
        for (y, &w) in p.iter().enumerate() {
            inv[w as usize] = y as u64;
        }
        perms.push(p);
        inv_perms.push(inv);
    }
    Ok(ReedSolomonFamily {
        q,
        k,
        d,
        points,
        perms,
        inv_perms,
    })
}

impl ReedSolomonFamily {
    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn degree_bound(&self) -> usize {
        self.d
    }

    /// `q^{d+1}`, the number of supported sets.
    pub fn support_size(&self) -> f64 {
        (self.q as f64).powi(self.d as i32 + 1)
    }

    /// Decomposes a flat index into (block, y-value).
    pub fn block_value(&self, flat: usize) -> (usize, u64) {
        (flat / self.q as usize, (flat % self.q as usize) as u64)
    }

    /// One element per block, in block order; `None` otherwise.
    fn transversal_values(&self, s: &KSubset) -> Option<Vec<u64>> {
        if s.len() != self.k {
            return None;
        }
        let mut values = Vec::with_capacity(self.k);
        for (want_block, flat) in s.iter().enumerate() {
            let (block, y) = self.block_value(flat);
            if block != want_block {
                return None;
            }
            values.push(y);
        }
        Some(values)
    }

    /// Evaluates the Lagrange interpolation of `(xs[j], ws[j])` for `j` in
    /// `support` at `x`, mod q.
    fn lagrange_eval(&self, support: &[usize], ws: &[u64], x: u64) -> u64 {
        let q = self.q;
        let mut total = 0u64;
        for &j in support {
            let xj = self.points[j];
            let mut num = 1u64;
            let mut den = 1u64;
            for &l in support {
                if l == j {
                    continue;
                }
                let xl = self.points[l];
                num = num * ((x + q - xl) % q) % q;
                den = den * ((xj + q - xl) % q) % q;
            }
            total = (total + ws[j] % q * num % q * inv_mod(den, q)) % q;
        }
        total
    }

    /// Builds the member set induced by polynomial coefficients `c_0..c_d`.
    pub fn set_from_coefficients(&self, coeffs: &[u64]) -> KSubset {
        debug_assert_eq!(coeffs.len(), self.d + 1);
        let flats: Vec<usize> = (0..self.k)
            .map(|i| {
                let x = self.points[i];
                let mut w = 0u64;
                for &c in coeffs.iter().rev() {
                    w = (w * x + c) % self.q;
                }
                let y = self.inv_perms[i][w as usize];
                i * self.q as usize + y as usize
            })
            .collect();
        KSubset::from_sorted_unchecked(flats)
    }
}

impl WeightedFamily for ReedSolomonFamily {
    fn ground_size(&self) -> usize {
        self.k * self.q as usize
    }

    fn set_size(&self) -> usize {
        self.k
    }

    fn log_weight(&self, s: &KSubset) -> f64 {
        let Some(ys) = self.transversal_values(s) else {
            return f64::NEG_INFINITY;
        };
        let ws: Vec<u64> = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| self.perms[i][y as usize])
            .collect();
        // interpolate through the first d+1 points and check the rest
        let support: Vec<usize> = (0..=self.d).collect();
        for i in (self.d + 1)..self.k {
            if self.lagrange_eval(&support, &ws, self.points[i]) != ws[i] {
                return f64::NEG_INFINITY;
            }
        }
        0.0
    }

    fn support_sample(&self, rng: &mut RngStream) -> Option<KSubset> {
        let coeffs: Vec<u64> = (0..=self.d).map(|_| rng.gen_range(self.q)).collect();
        Some(self.set_from_coefficients(&coeffs))
    }
}
