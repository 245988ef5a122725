//! The `bench` subcommand: CSV-emitting measurement suites.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail};

use sparsedom::analysis::{enumerate, exact_transition_matrix};
use sparsedom::dist::{KSubset, SubdivisionMap};
use sparsedom::families::{make_reed_solomon, FamilySpec, ReedSolomonSpec};
use sparsedom::pipeline::sparsified_sample;
use sparsedom::samplers::{
    choose_t, default_inner_steps, find_initial_state, floyd_sample, rejection_intermediate_step,
    restricted_distribution, ChainConfig, InnerSampler,
};
use sparsedom::{Family, RngStream, WeightedFamily};

use crate::Cli;

const CSV_VERSION: &str = "sparsedom-bench v1";

pub fn cmd_bench(cli: &Cli, suite: &str, trials: usize) -> anyhow::Result<i32> {
    let seed = cli.seed.unwrap_or(0);
    let body = match suite {
        "rejection-vs-markov" => rejection_vs_markov(cli, trials)?,
        "sparsify-scaling" => sparsify_scaling(trials, seed, &[500, 1000, 2000, 5000])?,
        "reed-solomon-coverage" => reed_solomon_coverage(cli, trials, seed)?,
        "blowup-coverage" => blowup_coverage(trials, seed)?,
        other => bail!(
            "unknown suite {other}; expected rejection-vs-markov, sparsify-scaling, \
             reed-solomon-coverage, or blowup-coverage"
        ),
    };
    cli.write_output(&body)?;
    Ok(0)
}

fn header(suite: &str, columns: &str) -> String {
    format!("# {CSV_VERSION} suite={suite}\n{columns}\n")
}

/// Acceptance rate of the rejection-based intermediate step vs the one-step
/// TV of the Markov intermediate kernel, across a grid of t, on the
/// enumerable family loaded from --spec.
fn rejection_vs_markov(cli: &Cli, trials: usize) -> anyhow::Result<String> {
    let (spec, _) = cli.load_spec()?;
    let fam = spec.build()?;
    let seed = cli.effective_seed(&spec);
    let n = fam.ground_size();
    let k = fam.set_size();
    let mu = enumerate(&fam)?;
    let mut out = header("rejection-vs-markov", "n,t,metric,value");
    let mut rng = RngStream::new(seed, 0);
    let s0 = find_initial_state(&fam, &mut rng)?;
    for t in (2 * k)..=n {
        let kernel = exact_transition_matrix(&mu, t)?;
        let tv = kernel.max_row_tv(&mu)?;
        // exact worst-case intermediate mass over all T, for this S0
        let complement: Vec<usize> = (0..n).filter(|&e| !s0.contains(e)).collect();
        let mut m_bound = 0.0f64;
        for c in itertools_combinations(&complement, t - k) {
            let pool = s0.union(&KSubset::new(c).expect("distinct"));
            if let Ok(d) = restricted_distribution(&fam, &pool) {
                m_bound = m_bound.max(d.log_z().exp());
            }
        }
        let mut proposals = 0usize;
        for _ in 0..trials {
            let (_, tries) =
                rejection_intermediate_step(&fam, &s0, t, m_bound * (1.0 + 1e-9), &mut rng)?;
            proposals += tries;
        }
        let acceptance = trials as f64 / proposals as f64;
        writeln!(out, "{n},{t},acceptance_rate,{acceptance}").unwrap();
        writeln!(out, "{n},{t},one_step_tv,{tv}").unwrap();
    }
    Ok(out)
}

fn itertools_combinations(pool: &[usize], m: usize) -> Vec<Vec<usize>> {
    use itertools_shim::combinations;
    combinations(pool, m)
}

// avoid pulling the full itertools crate into the CLI for one helper
mod itertools_shim {
    pub fn combinations(pool: &[usize], m: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut idx: Vec<usize> = (0..m).collect();
        if m > pool.len() {
            return out;
        }
        loop {
            out.push(idx.iter().map(|&i| pool[i]).collect());
            // advance the index vector
            let mut i = m;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if idx[i] != i + pool.len() - m {
                    break;
                }
            }
            idx[i] += 1;
            for j in (i + 1)..m {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
}

/// A low-rank Gram-kernel determinantal point process evaluated lazily, so
/// large ground sets never materialize an n x n matrix.
pub struct GramDpp {
    rows: Vec<Vec<f64>>,
    k: usize,
}

impl GramDpp {
    pub fn random(n: usize, rank: usize, k: usize, seed: u64) -> Self {
        let mut rng = RngStream::new(seed, 0);
        let rows = (0..n)
            .map(|_| (0..rank).map(|_| rng.next_f64() * 2.0 - 1.0).collect())
            .collect();
        GramDpp { rows, k }
    }

    fn gram_det(&self, s: &KSubset) -> f64 {
        let k = s.len();
        let idx: Vec<usize> = s.iter().collect();
        let mut g = vec![0.0f64; k * k];
        for a in 0..k {
            for b in a..k {
                let dot: f64 = self.rows[idx[a]]
                    .iter()
                    .zip(&self.rows[idx[b]])
                    .map(|(x, y)| x * y)
                    .sum();
                g[a * k + b] = dot;
                g[b * k + a] = dot;
            }
        }
        // Gaussian elimination with partial pivoting
        let mut det = 1.0f64;
        for col in 0..k {
            let mut pivot = col;
            for r in (col + 1)..k {
                if g[r * k + col].abs() > g[pivot * k + col].abs() {
                    pivot = r;
                }
            }
            if g[pivot * k + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for c in 0..k {
                    g.swap(col * k + c, pivot * k + c);
                }
                det = -det;
            }
            let lead = g[col * k + col];
            det *= lead;
            for r in (col + 1)..k {
                let f = g[r * k + col] / lead;
                for c in col..k {
                    g[r * k + c] -= f * g[col * k + c];
                }
            }
        }
        det
    }
}

impl WeightedFamily for GramDpp {
    fn ground_size(&self) -> usize {
        self.rows.len()
    }
    fn set_size(&self) -> usize {
        self.k
    }
    fn log_weight(&self, s: &KSubset) -> f64 {
        let d = self.gram_det(s);
        if d > 0.0 {
            d.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
    fn support_sample(&self, rng: &mut RngStream) -> Option<KSubset> {
        Some(KSubset::from_sorted_unchecked(floyd_sample(
            rng,
            self.ground_size(),
            self.k,
        )))
    }
}

/// Amortized per-sample wall time at `t = choose_t` vs `t = n` for lazily
/// evaluated DPPs, `k = 4`.
pub fn sparsify_scaling(trials: usize, seed: u64, sizes: &[usize]) -> anyhow::Result<String> {
    let k = 4;
    let alpha = 0.5;
    let samples = trials.clamp(2, 10);
    let mut out = header("sparsify-scaling", "n,k,mode,t,seconds_per_sample");
    for &n in sizes {
        let fam: Family = Arc::new(GramDpp::random(n, 8, k, seed ^ n as u64));
        // uniform copy counts: the Gram rows are exchangeable in distribution
        let map = SubdivisionMap::identity(n);
        for (mode, t) in [
            ("sparse", choose_t(n, k, alpha, 2.0, 0.25, 2.5)),
            ("full", n),
        ] {
            let cfg = ChainConfig {
                t,
                steps: 3,
                inner: InnerSampler::DownUp {
                    l: 1,
                    steps: default_inner_steps(1, alpha, t).max(4 * k),
                },
                epsilon: 0.25,
                seed,
                complement_trick: false,
            };
            let start = Instant::now();
            for i in 0..samples {
                let mut rng = RngStream::new(seed, i as u64);
                sparsified_sample(&fam, &map, &cfg, &mut rng)
                    .map_err(|e| anyhow!("scaling sample failed at n={n}: {e}"))?;
            }
            let per = start.elapsed().as_secs_f64() / samples as f64;
            writeln!(out, "{n},{k},{mode},{t},{per}").unwrap();
        }
    }
    Ok(out)
}

/// Probability that a uniform t-subset of the ground set covers some
/// supported set, versus the union bound `t^k / q^{k-d-1}`.
fn reed_solomon_coverage(cli: &Cli, trials: usize, default_seed: u64) -> anyhow::Result<String> {
    // use the family from --spec when it is Reed-Solomon; fall back to the
    // canonical lower-bound instance
    let fam = match cli.spec.as_ref() {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            match FamilySpec::from_json(&text)? {
                FamilySpec::ReedSolomon {
                    q,
                    k,
                    d,
                    points,
                    seed,
                } => make_reed_solomon(ReedSolomonSpec {
                    q,
                    k,
                    d,
                    points,
                    seed,
                })?,
                _ => bail!("reed-solomon-coverage requires a reed_solomon family spec"),
            }
        }
        None => make_reed_solomon(ReedSolomonSpec {
            q: 101,
            k: 3,
            d: 0,
            points: vec![0, 1, 2],
            seed: default_seed,
        })?,
    };
    let q = fam.q();
    let k = fam.set_size();
    let d = fam.degree_bound();
    let ground = fam.ground_size();
    let mut out = header(
        "reed-solomon-coverage",
        "q,k,d,t,trials,coverage,union_bound",
    );
    let mut rng = RngStream::new(default_seed, 3);
    // all supported sets, enumerable when q^{d+1} is small
    let coeff_space = (q as f64).powi(d as i32 + 1);
    if coeff_space > 1e6 {
        bail!("coverage suite needs q^(d+1) <= 1e6, got {coeff_space}");
    }
    let supported: Vec<KSubset> = all_coefficient_sets(&fam);
    for t in [5usize, 10, 20, 40] {
        if t > ground {
            continue;
        }
        let mut covered = 0usize;
        for _ in 0..trials {
            let tset = floyd_sample(&mut rng, ground, t);
            let member: Vec<bool> = {
                let mut m = vec![false; ground];
                for &i in &tset {
                    m[i] = true;
                }
                m
            };
            if supported.iter().any(|s| s.iter().all(|i| member[i])) {
                covered += 1;
            }
        }
        let coverage = covered as f64 / trials as f64;
        let bound = (t as f64).powi(k as i32) / (q as f64).powi((k - d - 1) as i32);
        writeln!(out, "{q},{k},{d},{t},{trials},{coverage},{bound}").unwrap();
    }
    Ok(out)
}

fn all_coefficient_sets(fam: &sparsedom::families::ReedSolomonFamily) -> Vec<KSubset> {
    let q = fam.q();
    let d = fam.degree_bound();
    let mut coeffs = vec![0u64; d + 1];
    let mut out = Vec::new();
    loop {
        out.push(fam.set_from_coefficients(&coeffs));
        // odometer increment
        let mut pos = 0;
        loop {
            if pos > d {
                return out;
            }
            coeffs[pos] += 1;
            if coeffs[pos] < q {
                break;
            }
            coeffs[pos] = 0;
            pos += 1;
        }
    }
}

/// Coverage of the singleton blow-up instance: the support is one
/// m-element group per original singleton, so a t-subset covers it only when
/// it swallows a whole group.
fn blowup_coverage(trials: usize, seed: u64) -> anyhow::Result<String> {
    let m = 3usize; // k = m for the singleton blow-up
    let mut out = header("blowup-coverage", "n,k,t,trials,coverage,union_bound");
    let mut rng = RngStream::new(seed, 4);
    for n in [63usize, 126, 252] {
        let groups = n / m;
        for t in [6usize, 8, 12, 24] {
            if t > n {
                continue;
            }
            let mut covered = 0usize;
            for _ in 0..trials {
                let tset = floyd_sample(&mut rng, n, t);
                let mut per_group = vec![0usize; groups];
                for &i in &tset {
                    per_group[i / m] += 1;
                }
                if per_group.iter().any(|&c| c == m) {
                    covered += 1;
                }
            }
            let coverage = covered as f64 / trials as f64;
            let bound = groups as f64 * (t as f64 / n as f64).powi(m as i32) * m as f64;
            writeln!(out, "{n},{m},{t},{trials},{coverage},{bound}").unwrap();
        }
    }
    Ok(out)
}
