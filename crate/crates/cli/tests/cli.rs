use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dpslab-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn dpslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpslab")).args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn verify_passes_and_checks_its_own_artifacts() {
    let dir = scratch("verify");
    let first = dir.join("a");
    let out = dpslab(&["verify", "--out", first.to_str().unwrap()]);
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("verify: all suites passed"), "{text}");
    assert!(!text.contains("FAIL"));
    let out = dpslab(&["verify", "--out", dir.join("b").to_str().unwrap(), "--artifacts", first.to_str().unwrap()]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS artifacts"));
}

#[test]
fn invert_is_byte_reproducible() {
    let dir = scratch("invert");
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let d = dir.join(run);
        ok(&dpslab(&["invert", "--trials", "30", "--seed", "5", "--out", d.to_str().unwrap()]));
        reports.push(fs::read(d.join("report.json")).unwrap());
        assert_eq!(fs::read(d.join("manifest.json")).unwrap(), fs::read(dir.join("a/manifest.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let report: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(report["trials"], 30);
    assert_eq!(report["successes"], report["exact_seed_hits"]);
    assert!(report["config_sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn jobs_do_not_change_results() {
    let dir = scratch("jobs");
    for j in ["1", "3"] {
        let d = dir.join(j);
        ok(&dpslab(&["invert", "--trials", "24", "--jobs", j, "--out", d.to_str().unwrap()]));
    }
    let a: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("1/report.json")).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("3/report.json")).unwrap()).unwrap();
    for key in ["successes", "exact_seed_hits", "bits_consistent", "decode_agreements"] {
        assert_eq!(a[key], b[key], "{key}");
    }
}

#[test]
fn demo2d_reports_the_oracle_weight() {
    let dir = scratch("demo2d");
    ok(&dpslab(&["demo2d", "--y", "4", "--n", "200", "--out", dir.to_str().unwrap()]));
    let w: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("weights.json")).unwrap()).unwrap();
    let expect = 1.0 / (1.0 + (-16.0f64 / 2.42).exp());
    assert!((w["oracle_weight_upper"].as_f64().unwrap() - expect).abs() < 1e-12);
    let csv = fs::read_to_string(dir.join("posterior.csv")).unwrap();
    assert!(csv.starts_with("# config_sha256="));
    assert_eq!(csv.lines().nth(1), Some("sampler,x1,x2"));
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = scratch("badcfg");
    let cfg = dir.join("bad.toml");
    fs::write(&cfg, "seed = 3\nnot_a_key = 1\n").unwrap();
    let out = dpslab(&["--config", cfg.to_str().unwrap(), "sample", "--out", dir.join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_a_key"));
}

#[test]
fn tampered_artifact_is_detected() {
    let dir = scratch("tamper");
    let run = dir.join("run");
    ok(&dpslab(&["sample", "--n", "50", "--out", run.to_str().unwrap()]));
    let path = run.join("samples.csv");
    let mut body = fs::read_to_string(&path).unwrap();
    body.push_str("0,0\n");
    fs::write(&path, body).unwrap();
    let out = dpslab(&["verify", "--out", dir.join("v").to_str().unwrap(), "--artifacts", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("samples.csv: digest mismatch"));
}

#[test]
fn config_file_values_are_used() {
    let dir = scratch("cfg");
    let cfg = dir.join("c.toml");
    fs::write(&cfg, "seed = 11\n[instance]\nd = 3\nd_prime = 3\nR = 30.0\neps = 1.0\nbeta = 0.025\nbeta_max = 0.25\n").unwrap();
    let out_dir = dir.join("o");
    ok(&dpslab(&["--config", cfg.to_str().unwrap(), "sample", "--n", "10", "--out", out_dir.to_str().unwrap()]));
    let csv = fs::read_to_string(out_dir.join("samples.csv")).unwrap();
    let header = csv.lines().nth(1).unwrap();
    assert_eq!(header.split(',').count(), 7, "{header}");
    assert_eq!(csv.lines().count(), 12);
}
