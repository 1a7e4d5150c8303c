use std::path::Path;
use std::process::{Command, Output};

fn hypergrid(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypergrid"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_writes_binomial_slice() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypergrid(
        &["simulate", "--n", "8", "--mode", "exhaustive", "--f", "0", "--h", "1", "--x0", "0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let rho: Vec<f64> = last.split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(rho[0], 1.0);
    let mass: Vec<f64> = rho[1..].iter().filter(|v| **v > 0.0).map(|v| v / 8.0).collect();
    let binomial = [1.0, 8.0, 28.0, 56.0, 70.0, 56.0, 28.0, 8.0, 1.0].map(|c| c / 256.0);
    assert_eq!(mass, binomial);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("density.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["n"], 8);
    assert_eq!(json["density"]["ensemble"]["mode"], "exhaustive");
    assert_eq!(json["density"]["ensemble"]["count"], 512);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypergrid(&["simulate", "--n", "8", "--f", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--h"), "{}", stderr(&o));

    let o = hypergrid(&["simulate", "--n", "40", "--mode", "exhaustive", "--f", "0", "--h", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cap"), "{}", stderr(&o));

    let o = hypergrid(&["simulate", "--n", "8", "--f", "sin(", "--h", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = hypergrid(&["convergence", "--levels", "16,32"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = hypergrid(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypergrid(
        &["simulate", "--n", "64", "--mode", "sampled", "--samples", "10", "--f", "x^3", "--h", "0", "--x0", "5"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn verify_lemmas_and_weakform_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypergrid(&["verify", "lemmas", "--n", "8"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("lemmas.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["passed"], true);

    let o = hypergrid(&["verify", "weakform", "--n", "16", "--mode", "exhaustive"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn verify_crossval_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypergrid(
        &["verify", "crossval", "--n", "16", "--mode", "sampled", "--samples", "20", "--f", "-x", "--h", "0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn tolerance_failure_exits_one_and_names_the_term() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypergrid(&["verify", "weakform", "--n", "8", "--mode", "exhaustive", "--tol", "1e-9"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL") && stdout(&o).contains("residual"), "{}", stdout(&o));
}

#[test]
fn fp_solve_reports_admissible_step() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypergrid(&["fp-solve", "--f", "-x", "--h", "1", "--dx", "0.1", "--dt", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("admissible"), "{}", stderr(&o));

    let o = hypergrid(&["fp-solve", "--f", "-x", "--h", "1", "--dx", "0.0625", "--t-end", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("fp.csv")).unwrap();
    assert!(csv.starts_with("t,"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"n": 4, "f": "0", "h": "1", "mode": "exhaustive"}"#).unwrap();
    let o = hypergrid(&["simulate", "--config", cfg.to_str().unwrap(), "--n", "6"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("density.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["n"], 6);
    assert_eq!(json["density"]["ensemble"]["count"], 128);

    std::fs::write(&cfg, r#"{"n": 4, "bogus": 1}"#).unwrap();
    let o = hypergrid(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--n", "16", "--mode", "sampled", "--samples", "5000", "--seed", "4", "--f", "-x", "--h", "1"];
    assert_eq!(hypergrid(&args, dir.path()).status.code(), Some(0));
    let first = std::fs::read(dir.path().join("density.csv")).unwrap();
    let first_json = std::fs::read(dir.path().join("density.json")).unwrap();
    assert_eq!(hypergrid(&args, dir.path()).status.code(), Some(0));
    assert_eq!(first, std::fs::read(dir.path().join("density.csv")).unwrap());
    assert_eq!(first_json, std::fs::read(dir.path().join("density.json")).unwrap());
}

#[test]
fn pair_and_equivalent() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypergrid(&["pair", "--n", "64", "--dist", "dirac", "--phi", "bump(x/2)"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pair.json")).unwrap()).unwrap();
    assert_eq!(json["value"].as_f64().unwrap(), (-1.0f64).exp());

    let o = hypergrid(&["equivalent", "--n", "64", "--dist", "dirac", "--dist2", "split"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = hypergrid(&["equivalent", "--n", "64", "--dist", "dirac", "--dist2", "dirac-derivative"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}
