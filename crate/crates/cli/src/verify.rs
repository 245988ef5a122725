//! The `verify` subcommand: oracle checks against the current family spec.

use anyhow::anyhow;

use sparsedom::analysis::{
    correlation_matrix, ei_tangent_check, enumerate, exact_transition_matrix, flc_certificate,
};
use sparsedom::dist::{subdivide, SubdivisionMap};
use sparsedom::samplers::{choose_t, subset_containment_probability};
use sparsedom::{Family, RngStream, WeightedFamily};

use crate::Cli;

const ALL_CHECKS: &[&str] = &[
    "stationarity",
    "one-step-tv",
    "ei-tangent",
    "flc-eig",
    "spectrum-subdivision",
    "containment-bounds",
];

pub fn cmd_verify(
    cli: &Cli,
    checks: Option<&str>,
    trials: usize,
    alpha: f64,
    c0: f64,
) -> anyhow::Result<i32> {
    let (spec, _) = cli.load_spec()?;
    let fam = spec.build()?;
    let seed = cli.effective_seed(&spec);
    let family_name = serde_json::from_str::<serde_json::Value>(&spec.to_json())
        .ok()
        .and_then(|v| v.get("family").and_then(|f| f.as_str().map(String::from)))
        .unwrap_or_default();
    let selected: Vec<String> = match checks {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => ALL_CHECKS.iter().map(|s| s.to_string()).collect(),
    };
    let mut reports = Vec::new();
    let mut all_pass = true;
    for name in &selected {
        if !ALL_CHECKS.contains(&name.as_str()) {
            return Err(anyhow!(
                "unknown check {name}; expected one of {ALL_CHECKS:?}"
            ));
        }
        let (max_violation, pass, params) = run_check(name, &fam, trials, alpha, c0, seed)?;
        all_pass &= pass;
        reports.push(serde_json::json!({
            "check": name,
            "family": family_name,
            "params": params,
            "trials": trials,
            "max_violation": max_violation,
            "pass": pass,
        }));
    }
    cli.write_output(&format!(
        "{}\n",
        serde_json::to_string_pretty(&serde_json::Value::Array(reports))?
    ))?;
    Ok(if all_pass { 0 } else { 2 })
}

fn run_check(
    name: &str,
    fam: &Family,
    trials: usize,
    alpha: f64,
    c0: f64,
    seed: u64,
) -> anyhow::Result<(f64, bool, serde_json::Value)> {
    let n = fam.ground_size();
    let k = fam.set_size();
    match name {
        "stationarity" => {
            let mu = enumerate(fam)?;
            let t = (2 * k).min(n);
            let kernel = exact_transition_matrix(&mu, t)?;
            let gap = kernel.stationary_gap(&mu)?;
            let min_entry = kernel.min_entry();
            let pass = gap <= 1e-10 && (t < 2 * k || min_entry > 0.0);
            Ok((
                gap,
                pass,
                serde_json::json!({ "t": t, "min_entry": min_entry }),
            ))
        }
        "one-step-tv" => {
            let mu = enumerate(fam)?;
            let t = choose_t(n, k, alpha, 2.0, 0.25, c0);
            let kernel = exact_transition_matrix(&mu, t)?;
            let tv = kernel.max_row_tv(&mu)?;
            Ok((
                tv,
                tv <= 0.25,
                serde_json::json!({ "t": t, "alpha": alpha, "c0": c0, "bound": 0.25 }),
            ))
        }
        "ei-tangent" => {
            let mu = enumerate(fam)?;
            let mut rng = RngStream::new(seed, 0);
            let zs: Vec<Vec<f64>> = (0..trials.max(1))
                .map(|_| (0..n).map(|_| 4.0 * rng.next_f64()).collect())
                .collect();
            let report = ei_tangent_check(&mu, alpha, &zs)?;
            Ok((
                report.max_violation,
                report.pass,
                serde_json::json!({ "alpha": alpha, "seed": seed }),
            ))
        }
        "flc-eig" => {
            let mut rng = RngStream::new(seed, 1);
            let report = flc_certificate(fam, alpha, trials, &mut rng)?;
            Ok((
                report.max_lambda_max - 1.0 / alpha,
                report.pass,
                serde_json::json!({
                    "alpha": alpha,
                    "seed": seed,
                    "max_lambda_max": report.max_lambda_max,
                    "witness_field": report.witness,
                }),
            ))
        }
        "spectrum-subdivision" => {
            let mu = enumerate(fam)?;
            let base = correlation_matrix(&mu)?;
            let counts: Vec<usize> = (0..n).map(|i| (i % 3) + 1).collect();
            let map = SubdivisionMap::new(counts.clone())?;
            let sub = subdivide(fam.clone(), map)?;
            let sub_cm = correlation_matrix(&enumerate(&sub)?)?;
            // expected: base spectrum plus an eigenvalue 1 for each extra copy
            // of a retained element
            let mut expected = base.spectrum();
            for &i in base.retained() {
                for _ in 1..counts[i] {
                    expected.push(1.0);
                }
            }
            expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let observed = sub_cm.spectrum();
            let violation = if expected.len() != observed.len() {
                f64::INFINITY
            } else {
                expected
                    .iter()
                    .zip(&observed)
                    .map(|(e, o)| (e - o).abs())
                    .fold(0.0f64, f64::max)
            };
            Ok((
                violation,
                violation <= 1e-7,
                serde_json::json!({ "copies": counts }),
            ))
        }
        "containment-bounds" => {
            let mut rng = RngStream::new(seed, 2);
            let mut violation = 0.0f64;
            for _ in 0..trials.max(1) {
                let n = 2 + rng.gen_index(60);
                let t = 1 + rng.gen_index(n);
                let v = rng.gen_index(t + 1);
                let u = rng.gen_index(t - v + 1);
                if u + v > n {
                    continue;
                }
                let (lo, ex, hi) = subset_containment_probability(n, t, u, v)?;
                violation = violation.max(lo - ex).max(ex - hi);
            }
            Ok((
                violation,
                violation <= 1e-12,
                serde_json::json!({ "seed": seed }),
            ))
        }
        _ => unreachable!("checked above"),
    }
}
