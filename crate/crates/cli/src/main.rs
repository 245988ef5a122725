//! Command-line surface over the sparsedom library: reproducible sample
//! generation, marginal estimation, the isotropic transform, counting,
//! verification suites, and benchmarks.

mod bench;
mod verify;

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};

use sparsedom::families::FamilySpec;
use sparsedom::pipeline::{
    count_partition_function, default_marginal_samples, estimate_marginals, isotropic_transform,
    load_marginal_cache, sample_batch, save_marginal_cache, CountingConfig, MarginalEstimates,
};
use sparsedom::samplers::{
    choose_t, default_chain_steps, default_inner_steps, find_initial_state, run_chain, ChainConfig,
    InnerSampler,
};
use sparsedom::{Family, RngStream, WeightedFamily};

#[derive(Parser)]
#[command(name = "sparsedom", about = "Domain-sparsified sampling of k-subsets")]
struct Cli {
    /// Path to the JSON family spec.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,

    /// Seed override; defaults to the seed in the family spec.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for batch workloads (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    parallel: usize,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw samples via the sparsified intermediate-sampling chain.
    Sample {
        #[arg(long)]
        count: usize,
        /// Marginal-cache path; defaults to `<spec>.marginals.json`.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Estimate marginals now instead of requiring a cache.
        #[arg(long)]
        estimate_marginals: bool,
        /// Append a JSON metadata footer line.
        #[arg(long)]
        stats: bool,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        eps_prime: f64,
        #[arg(long, default_value_t = 2.5)]
        c0: f64,
        /// Override the intermediate size chosen by the t-formula.
        #[arg(long)]
        t: Option<usize>,
    },
    /// Estimate marginals and write the cache file.
    Marginals {
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 2.5)]
        c0: f64,
    },
    /// Print the isotropic transformation induced by the cached marginals.
    Transform {
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Estimate the partition function with a confidence interval.
    Count {
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 1e5)]
        base_guard: f64,
    },
    /// Run oracle checks; exit 0 iff all pass, 2 otherwise.
    Verify {
        /// Comma-separated subset of
        /// stationarity,one-step-tv,ei-tangent,flc-eig,spectrum-subdivision,containment-bounds.
        #[arg(long)]
        checks: Option<String>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2.5)]
        c0: f64,
    },
    /// Emit a benchmark CSV.
    Bench {
        /// One of rejection-vs-markov, sparsify-scaling, reed-solomon-coverage,
        /// blowup-coverage.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.to_string().contains("too large") || e.to_string().contains("instance too large") {
                2
            } else {
                1
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    if cli.parallel > 0 {
        rayon_limit(cli.parallel);
    }
    match &cli.cmd {
        Cmd::Sample {
            count,
            cache,
            estimate_marginals: do_estimate,
            stats,
            alpha,
            eps_prime,
            c0,
            t,
        } => cmd_sample(
            &cli,
            *count,
            cache.as_deref(),
            *do_estimate,
            *stats,
            *alpha,
            *eps_prime,
            *c0,
            *t,
        ),
        Cmd::Marginals {
            n_samples,
            eta,
            delta,
            alpha,
            c0,
        } => cmd_marginals(&cli, *n_samples, *eta, *delta, *alpha, *c0),
        Cmd::Transform { cache } => cmd_transform(&cli, cache.as_deref()),
        Cmd::Count {
            epsilon,
            delta,
            base_guard,
        } => cmd_count(&cli, *epsilon, *delta, *base_guard),
        Cmd::Verify {
            checks,
            trials,
            alpha,
            c0,
        } => verify::cmd_verify(&cli, checks.as_deref(), *trials, *alpha, *c0),
        Cmd::Bench { suite, trials } => bench::cmd_bench(&cli, suite, *trials),
    }
}

fn rayon_limit(threads: usize) {
    // ignore failure when a global pool already exists (tests)
    let _ = sparsedom::rayon_thread_pool(threads);
}

impl Cli {
    fn load_spec(&self) -> anyhow::Result<(FamilySpec, PathBuf)> {
        let path = self
            .spec
            .clone()
            .ok_or_else(|| anyhow!("--spec PATH is required"))?;
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading spec {}", path.display()))?;
        let spec = FamilySpec::from_json(&text)?;
        Ok((spec, path))
    }

    fn effective_seed(&self, spec: &FamilySpec) -> u64 {
        self.seed.unwrap_or_else(|| spec.seed())
    }

    fn write_output(&self, body: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(path) => {
                std::fs::write(path, body)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            None => print!("{body}"),
        }
        Ok(())
    }
}

fn default_cache_path(spec_path: &Path) -> PathBuf {
    let mut name = spec_path.file_name().unwrap_or_default().to_os_string();
    name.push(".marginals.json");
    spec_path.with_file_name(name)
}

fn pick_inner(t: usize, k: usize, alpha: f64) -> InnerSampler {
    if sparsedom::dist::ln_binomial(t, k) <= 1e5f64.ln() {
        InnerSampler::Exact
    } else {
        InnerSampler::DownUp {
            l: k.min((1.0 / alpha).ceil() as usize),
            steps: default_inner_steps(k, alpha, t),
        }
    }
}

fn chain_sampler_config(
    n: usize,
    k: usize,
    alpha: f64,
    eps_prime: f64,
    c0: f64,
    seed: u64,
) -> ChainConfig {
    let t = choose_t(n, k, alpha, 2.0, 0.25, c0);
    ChainConfig {
        t,
        steps: default_chain_steps(eps_prime),
        inner: pick_inner(t, k, alpha),
        epsilon: 0.25,
        seed,
        complement_trick: false,
    }
}

fn estimate_now(
    fam: &Family,
    n_samples: usize,
    eta: f64,
    alpha: f64,
    c0: f64,
    seed: u64,
) -> anyhow::Result<MarginalEstimates> {
    let n = fam.ground_size();
    let k = fam.set_size();
    let cfg = chain_sampler_config(n, k, alpha, 0.05, c0, seed);
    let mut rng = RngStream::new(seed, u64::MAX);
    let est = estimate_marginals(
        fam,
        |r| {
            let start = find_initial_state(fam, r)?;
            run_chain(fam, &start, &cfg, r)
        },
        n_samples,
        eta,
        &mut rng,
    )?;
    Ok(est)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    cli: &Cli,
    count: usize,
    cache: Option<&Path>,
    do_estimate: bool,
    stats: bool,
    alpha: f64,
    eps_prime: f64,
    c0: f64,
    t_override: Option<usize>,
) -> anyhow::Result<i32> {
    let (spec, spec_path) = cli.load_spec()?;
    let fam = spec.build()?;
    let seed = cli.effective_seed(&spec);
    let k = fam.set_size();
    let cache_path = cache
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_cache_path(&spec_path));
    let start = std::time::Instant::now();
    let est = if do_estimate {
        let n_samples = default_marginal_samples(fam.ground_size(), k, 0.05).min(20_000);
        let est = estimate_now(&fam, n_samples, 0.5, alpha, c0, seed)?;
        save_marginal_cache(&cache_path, &est, &spec.fingerprint())?;
        est
    } else {
        load_marginal_cache(&cache_path, &spec.fingerprint()).map_err(|e| {
            anyhow!(
                "marginal cache unavailable at {}: {e}; run `sparsedom marginals` \
                 first or pass --estimate-marginals",
                cache_path.display()
            )
        })?
    };
    let map = isotropic_transform(&est)?;
    let u = map.total();
    let t = t_override.unwrap_or_else(|| choose_t(u, k, alpha, 2.0, 0.25, c0));
    let cfg = ChainConfig {
        t,
        steps: default_chain_steps(eps_prime),
        inner: pick_inner(t, k, alpha),
        epsilon: 0.25,
        seed,
        complement_trick: false,
    };
    let samples = sample_batch(&fam, &map, &cfg, count, seed)?;
    let mut body = String::new();
    for s in &samples {
        let line: Vec<String> = s.iter().map(|i| i.to_string()).collect();
        body.push_str(&line.join(" "));
        body.push('\n');
    }
    if stats {
        let footer = serde_json::json!({
            "count": count,
            "t": t,
            "steps": cfg.steps,
            "u": u,
            "seed": seed,
            "family_fingerprint": spec.fingerprint(),
            "elapsed_ms": start.elapsed().as_millis() as u64,
        });
        body.push_str(&footer.to_string());
        body.push('\n');
    }
    cli.write_output(&body)?;
    Ok(0)
}

fn cmd_marginals(
    cli: &Cli,
    n_samples: Option<usize>,
    eta: f64,
    delta: f64,
    alpha: f64,
    c0: f64,
) -> anyhow::Result<i32> {
    let (spec, spec_path) = cli.load_spec()?;
    let fam = spec.build()?;
    let seed = cli.effective_seed(&spec);
    let n_samples = n_samples
        .unwrap_or_else(|| default_marginal_samples(fam.ground_size(), fam.set_size(), delta));
    let est = estimate_now(&fam, n_samples, eta, alpha, c0, seed)?;
    let path = cli
        .out
        .clone()
        .unwrap_or_else(|| default_cache_path(&spec_path));
    save_marginal_cache(&path, &est, &spec.fingerprint())?;
    eprintln!("wrote marginal cache to {}", path.display());
    Ok(0)
}

fn cmd_transform(cli: &Cli, cache: Option<&Path>) -> anyhow::Result<i32> {
    let (spec, spec_path) = cli.load_spec()?;
    let fam = spec.build()?;
    let cache_path = cache
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_cache_path(&spec_path));
    let est = load_marginal_cache(&cache_path, &spec.fingerprint())?;
    let map = isotropic_transform(&est)?;
    let counts: Vec<usize> = (0..fam.ground_size()).map(|i| map.count(i)).collect();
    let report = serde_json::json!({
        "n": fam.ground_size(),
        "k": fam.set_size(),
        "t": counts,
        "u": map.total(),
    });
    cli.write_output(&format!("{}\n", serde_json::to_string_pretty(&report)?))?;
    Ok(0)
}

fn cmd_count(cli: &Cli, epsilon: f64, delta: f64, base_guard: f64) -> anyhow::Result<i32> {
    if epsilon <= 0.0 {
        bail!("epsilon must be positive, got {epsilon}");
    }
    let (spec, _) = cli.load_spec()?;
    let fam = spec.build()?;
    let seed = cli.effective_seed(&spec);
    let cfg = CountingConfig {
        epsilon,
        delta,
        base_guard,
        ..CountingConfig::default()
    };
    let mut rng = RngStream::new(seed, 0);
    let report = count_partition_function(&fam, &cfg, &mut rng)?;
    let out = serde_json::json!({
        "Z_estimate": report.z_estimate,
        "ci": [report.ci_low, report.ci_high],
        "samples_used": report.samples_used,
        "factors": report.factors,
    });
    cli.write_output(&format!("{}\n", serde_json::to_string_pretty(&out)?))?;
    Ok(0)
}
