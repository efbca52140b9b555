use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ruelle-lab"));
    c.env_remove("RUELLE_LAB_OUT");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn table1_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["table1", "--n", "512"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(d.path().join("table1.manifest.json"));
    assert_eq!(m["config"]["command"]["name"], "table1");
    assert_eq!(m["config"]["command"]["n"], 512);
    let checks = m["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        assert_eq!(c["pass"], true, "{c}");
        assert!(c["name"].is_string() && c["residual"].is_number());
    }
    assert!(m["outputs"].as_array().unwrap().iter().any(|p| p.as_str().unwrap().ends_with("table1.json")));
}

#[test]
fn gauss_measure_is_not_ifs() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["ifs-test", "--map", "gauss", "--measure", "mu0", "--depth", "2"], d.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("NOT_IFS"));
    let v = read_json(d.path().join("ifs-test.json"));
    assert_eq!(v["witness"], serde_json::json!([1, 1]));
    let oracle = (10.0f64 / 9.0).log2() - (4.0f64 / 3.0).log2().powi(2);
    assert!((v["gap"].as_f64().unwrap() - oracle).abs() < 1e-3);
}

#[test]
fn gauss_invariant_density() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["invariant-density", "--map", "gauss", "--n", "1024", "--kmax", "10000"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.path().join("invariant-density.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("x_midpoint,density"));
    assert_eq!(lines.count(), 1024);
}

#[test]
fn precondition_failures_exit_2() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        &["invariant-density", "--map", "tent"][..],
        &["invariant-density", "--n", "0"],
        &["radon-nikodym", "--map", "gauss", "--weight", "cos2"],
        &["markov-test", "--weight", "custom"],
        &["markov-sample", "--start", "1.5"],
        &["wold", "--n", "96", "--depth", "6"],
        &["no-such-command"],
    ] {
        let o = run(args, d.path());
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn contract_failure_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["invariant-density", "--map", "gauss", "--n", "256", "--kmax", "2000", "--tol", "1e-9"], d.path());
    assert_eq!(code(&o), 3);
    let m = read_json(d.path().join("invariant-density.manifest.json"));
    assert_eq!(m["checks"][0]["pass"], false);
}

#[test]
fn config_file_beneath_flags() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.conf");
    fs::write(&cfg, "# small grid\nn = 64\nmap = uniform\nbranches = 3\ndepth = 4\n").unwrap();
    let o = run(&["wold", "--config", cfg.to_str().unwrap(), "--n", "81"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(d.path().join("wold.manifest.json"));
    assert_eq!(m["config"]["command"]["n"], 81);
    assert_eq!(m["config"]["command"]["map"]["branches"], 3);
}

#[test]
fn out_directory_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = bin().args(["couple-roundtrip", "--trials", "5"]).env("RUELLE_LAB_OUT", d.path()).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(d.path().join("couple-roundtrip.manifest.json").exists());

    let e = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["couple-roundtrip", "--trials", "5", "--out"])
        .arg(e.path())
        .env("RUELLE_LAB_OUT", d.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(e.path().join("couple-roundtrip.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["markov-sample", "--weight", "cos2", "--start", "lebesgue", "--paths", "50", "--seed", "7"];
    assert_eq!(code(&run(&args, a.path())), 0);
    let o = bin().args(args).args(["--threads", "3", "--out"]).arg(b.path()).output().unwrap();
    assert_eq!(code(&o), 0);
    let f = "markov-sample.csv";
    assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());

    let (c, e) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&c, &e] {
        assert_eq!(code(&run(&["chaos-game", "--p", "0.2,0.8", "--samples", "5000"], dir.path())), 0);
    }
    assert_eq!(fs::read(c.path().join("chaos-game.bin")).unwrap(), fs::read(e.path().join("chaos-game.bin")).unwrap());
}

#[test]
fn custom_weight_matches_builtin() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["radon-nikodym", "--weight", "custom", "--weight-expr", "math::cos(pi*y)^2", "--n", "64"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let custom = fs::read_to_string(d.path().join("radon-nikodym.csv")).unwrap();
    let o = run(&["radon-nikodym", "--weight", "cos2", "--n", "64"], d.path());
    assert_eq!(code(&o), 0);
    let builtin = fs::read_to_string(d.path().join("radon-nikodym.csv")).unwrap();
    let col = |s: &str| -> Vec<f64> { s.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect() };
    for (a, b) in col(&custom).iter().zip(col(&builtin)) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn json_format_and_verdicts() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["exactness", "--n", "256", "--depth", "6", "--format", "json"], d.path());
    assert_eq!(code(&o), 0);
    let v = read_json(d.path().join("exactness.json"));
    assert_eq!(v["norms"].as_array().unwrap().len(), 6);
    assert_eq!(v["monotone"], true);

    let o = run(&["moment-test", "--p", "0.3,0.7"], d.path());
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(d.path().join("moment-test.json"))["consistent_with_ifs"], false);
    let o = run(&["moment-test"], d.path());
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(d.path().join("moment-test.json"))["consistent_with_ifs"], true);
}

#[test]
fn verify_all_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["verify-all"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
