use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsedom"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sparsedom-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_spec(dir: &PathBuf, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const UNIFORM_4_2: &str = r#"{
  "family": "table", "n": 4, "k": 2,
  "entries": [
    {"set": [0,1], "weight": 1.0}, {"set": [0,2], "weight": 1.0},
    {"set": [0,3], "weight": 1.0}, {"set": [1,2], "weight": 1.0},
    {"set": [1,3], "weight": 1.0}, {"set": [2,3], "weight": 1.0}
  ],
  "seed": 7
}"#;

const PAIRED_8: &str = r#"{"family": "paired", "n": 8, "seed": 11}"#;

const TABLE_235: &str = r#"{
  "family": "table", "n": 3, "k": 1,
  "entries": [
    {"set": [0], "weight": 2.0}, {"set": [1], "weight": 3.0},
    {"set": [2], "weight": 5.0}
  ],
  "seed": 5
}"#;

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn sample_output_is_byte_identical_for_same_spec_and_seed() {
    let dir = scratch("determinism");
    let spec = write_spec(&dir, "uniform.json", UNIFORM_4_2);
    let spec = spec.to_str().unwrap();
    let args = [
        "--spec",
        spec,
        "--seed",
        "42",
        "sample",
        "--count",
        "20",
        "--estimate-marginals",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
    // every line is a sorted pair of distinct indices in [0, 4)
    for line in stdout(&a).lines() {
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(|w| w.parse().unwrap())
            .collect();
        assert_eq!(idx.len(), 2);
        assert!(idx[0] < idx[1] && idx[1] < 4, "bad sample line {line}");
    }
}

#[test]
fn different_seeds_change_the_sample_stream() {
    let dir = scratch("seeds");
    let spec = write_spec(&dir, "uniform.json", UNIFORM_4_2);
    let spec = spec.to_str().unwrap();
    let base = [
        "--spec",
        spec,
        "sample",
        "--count",
        "30",
        "--estimate-marginals",
    ];
    let mut a1 = base.to_vec();
    a1.extend(["--seed", "1"]);
    let mut a2 = base.to_vec();
    a2.extend(["--seed", "2"]);
    let o1 = run(&a1);
    let o2 = run(&a2);
    assert!(o1.status.success() && o2.status.success());
    assert_ne!(o1.stdout, o2.stdout);
}

#[test]
fn sample_count_zero_emits_empty_body_and_stats_footer() {
    let dir = scratch("zero");
    let spec = write_spec(&dir, "uniform.json", UNIFORM_4_2);
    let out = run(&[
        "--spec",
        spec.to_str().unwrap(),
        "--seed",
        "3",
        "sample",
        "--count",
        "0",
        "--estimate-marginals",
        "--stats",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    let footer = lines.next().expect("stats footer present");
    assert!(lines.next().is_none(), "no sample lines expected");
    let v: serde_json::Value = serde_json::from_str(footer).unwrap();
    assert_eq!(v["count"], 0);
    assert!(v["t"].as_u64().unwrap() >= 2);
    assert!(v["family_fingerprint"].as_str().unwrap().len() == 64);
}

#[test]
fn verify_passes_on_uniform_family() {
    let dir = scratch("verify-pass");
    let spec = write_spec(&dir, "uniform.json", UNIFORM_4_2);
    let out = run(&["--spec", spec.to_str().unwrap(), "verify", "--trials", "50"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let reports: Vec<serde_json::Value> = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(reports.len(), 6);
    for r in &reports {
        assert_eq!(r["pass"], true, "check {} failed", r["check"]);
        assert_eq!(r["family"], "table");
        assert!(r.get("max_violation").is_some());
        assert!(r.get("params").is_some());
        assert!(r.get("trials").is_some());
    }
}

#[test]
fn verify_flags_failing_certificate_with_exit_two() {
    let dir = scratch("verify-fail");
    let spec = write_spec(&dir, "paired.json", PAIRED_8);
    let out = run(&[
        "--spec",
        spec.to_str().unwrap(),
        "verify",
        "--checks",
        "flc-eig",
        "--alpha",
        "1.0",
        "--trials",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let reports: Vec<serde_json::Value> = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0]["pass"], false);
    assert!(reports[0]["max_violation"].as_f64().unwrap() > 0.9);
}

#[test]
fn count_reports_exact_partition_function_on_small_table() {
    let dir = scratch("count");
    let spec = write_spec(&dir, "table.json", TABLE_235);
    let out = run(&["--spec", spec.to_str().unwrap(), "--seed", "1", "count"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let z = v["Z_estimate"].as_f64().unwrap();
    assert!((z - 10.0).abs() < 1e-9, "Z={z}");
    let ci = v["ci"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() <= z && z <= ci[1].as_f64().unwrap());
    assert!(v.get("samples_used").is_some());
}

#[test]
fn unknown_spec_field_is_rejected() {
    let dir = scratch("strict");
    let spec = write_spec(
        &dir,
        "bad.json",
        r#"{"family": "paired", "n": 8, "seed": 1, "bogus": true}"#,
    );
    let out = run(&["--spec", spec.to_str().unwrap(), "count"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus"), "stderr: {err}");
}

#[test]
fn missing_marginal_cache_error_names_the_cache_path() {
    let dir = scratch("nocache");
    let spec = write_spec(&dir, "uniform.json", UNIFORM_4_2);
    let out = run(&["--spec", spec.to_str().unwrap(), "sample", "--count", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("uniform.json.marginals.json"), "stderr: {err}");
    assert!(err.contains("--estimate-marginals"), "stderr: {err}");
}

#[test]
fn marginals_then_transform_then_sample_pipeline() {
    let dir = scratch("pipeline");
    let spec = write_spec(&dir, "uniform.json", UNIFORM_4_2);
    let spec = spec.to_str().unwrap();
    let m = run(&[
        "--spec",
        spec,
        "--seed",
        "9",
        "marginals",
        "--n-samples",
        "2000",
    ]);
    assert!(m.status.success(), "{}", String::from_utf8_lossy(&m.stderr));
    assert!(dir.join("uniform.json.marginals.json").exists());

    let t = run(&["--spec", spec, "transform"]);
    assert!(t.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&t)).unwrap();
    assert_eq!(v["n"], 4);
    assert_eq!(v["k"], 2);
    let u = v["u"].as_u64().unwrap();
    assert!(u <= 8, "|U|={u} exceeds 2n");
    let copies: u64 = v["t"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .sum();
    assert_eq!(copies, u);

    // cache now exists, so sampling without --estimate-marginals works
    let s = run(&["--spec", spec, "--seed", "4", "sample", "--count", "5"]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    assert_eq!(stdout(&s).lines().count(), 5);
}

#[test]
fn out_flag_writes_file_identical_to_stdout() {
    let dir = scratch("outflag");
    let spec = write_spec(&dir, "uniform.json", UNIFORM_4_2);
    let spec = spec.to_str().unwrap();
    let to_stdout = run(&[
        "--spec",
        spec,
        "--seed",
        "8",
        "sample",
        "--count",
        "10",
        "--estimate-marginals",
    ]);
    assert!(to_stdout.status.success());
    let out_path = dir.join("samples.txt");
    let to_file = run(&[
        "--spec",
        spec,
        "--seed",
        "8",
        "--out",
        out_path.to_str().unwrap(),
        "sample",
        "--count",
        "10",
        "--estimate-marginals",
    ]);
    assert!(to_file.status.success());
    assert!(to_file.stdout.is_empty());
    assert_eq!(std::fs::read(&out_path).unwrap(), to_stdout.stdout);
}

#[test]
fn bench_emits_versioned_csv() {
    let dir = scratch("bench");
    let spec = write_spec(&dir, "uniform.json", UNIFORM_4_2);
    let out = run(&[
        "--spec",
        spec.to_str().unwrap(),
        "--seed",
        "2",
        "bench",
        "--suite",
        "rejection-vs-markov",
        "--trials",
        "20",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let mut lines = text.lines();
    let head = lines.next().unwrap();
    assert!(head.starts_with("# sparsedom-bench v1"), "header: {head}");
    assert_eq!(lines.next().unwrap(), "n,t,metric,value");
    assert!(lines.next().is_some());
}

#[test]
fn unknown_bench_suite_is_an_error() {
    let out = run(&["bench", "--suite", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}
