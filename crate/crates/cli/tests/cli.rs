use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qmemsim(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmemsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("QMEMSIM_PROFILE")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = qmemsim(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--state", "ghz:4", "--model", "qubit:4", "--t-end", "2"]);
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,fidelity"));
    assert_eq!(lines.next(), Some("0.0,1.0"));
    assert!(lines.last().unwrap().starts_with("2.0,"));

    let manifest = read_json(dir.path().join("manifest.json"));
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["parameters"]["command"]["simulate"]["state"], "ghz:4");
    assert_eq!(manifest["outputs"][0], "trace.csv");
    assert!(manifest["config_digest"].as_str().unwrap().len() == 64);
}

#[test]
fn simulate_fock_crossing() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--state", "fock:1024:512", "--model", "qudit:1024", "--target", "0.75"]);
    let crossing = read_json(dir.path().join("crossing.json"));
    let t = crossing["t_cross"].as_f64().unwrap();
    let exact = (4.0f64 / 3.0).ln() / 512.0;
    assert!((t - exact).abs() < 1e-9 * exact, "{t} vs {exact}");
}

#[test]
fn simulate_nh_on_grid() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["simulate", "--state", "w:3", "--model", "qudit:8", "--t-end", "1", "--samples", "4", "--nh"],
    );
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
    let meta = read_json(dir.path().join("trace_meta.json"));
    assert_eq!(meta["method"], "nh-analytic");
}

#[test]
fn argument_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = qmemsim(dir.path(), &["simulate", "--state", "bell:2", "--model", "qudit:4", "--t-end", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("unrecognized state") && err.contains("Usage"), "{err}");

    // Missing stop time.
    let o = qmemsim(dir.path(), &["simulate", "--state", "ghz:2", "--model", "qubit:2"]);
    assert_eq!(o.status.code(), Some(2));

    // Valid grammar, but the state does not fit the model.
    let o = qmemsim(dir.path(), &["ratio", "--state", "ghz:3", "--a", "qubit:2", "--b", "qudit:4"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let o = qmemsim(dir.path(), &["ratio", "--state", "ghz:2", "--a", "qubit:2", "--b", "qudit:4", "--gamma", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn integration_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = qmemsim(
        dir.path(),
        &["simulate", "--state", "ghz:3", "--model", "qubit:3", "--t-end", "1", "--max-steps", "5"],
    );
    assert_eq!(o.status.code(), Some(3));

    // The vacuum never decays, so the target is never reached.
    let o = qmemsim(dir.path(), &["ratio", "--state", "fock:4:0", "--a", "qubit:2", "--b", "qudit:4"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn ratio_ghz_10() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ratio", "--state", "ghz:10", "--a", "qubit:10", "--b", "qudit:1024"]);
    let report = read_json(dir.path().join("ratio.json"));
    let predicted = report["predicted"]["first_order"].as_f64().unwrap();
    assert!((predicted - 1023.0 / 20.0).abs() < 1e-12);
    assert_eq!(report["target_fidelity"], 0.75);
}

#[test]
fn ratio_output_is_reproducible() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["ratio", "--state", "arb:16", "--a", "qubit:4", "--b", "qudit:16", "--seed", "11"];
    ok(d1.path(), &args);
    ok(d2.path(), &args);
    let a = std::fs::read(d1.path().join("ratio.json")).unwrap();
    let b = std::fs::read(d2.path().join("ratio.json")).unwrap();
    assert_eq!(a, b);
    let manifest = read_json(d1.path().join("manifest.json"));
    assert_eq!(manifest["seeds"], serde_json::json!([11]));
}

fn table(dir: &Path, extra: &[&str]) -> (String, Vec<Value>) {
    let mut args = vec!["table", "--ensemble", "2"];
    args.extend_from_slice(extra);
    ok(dir, &args);
    let csv = std::fs::read_to_string(dir.join("table.csv")).unwrap();
    let reports = std::fs::read_to_string(dir.join("reports.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    (csv, reports)
}

#[test]
fn table_is_thread_independent_and_seed_scoped() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let (csv1, r1) = table(dirs[0].path(), &["--jobs", "1"]);
    let (csv2, r2) = table(dirs[1].path(), &["--jobs", "2"]);
    assert_eq!(csv1, csv2);
    assert_eq!(r1, r2);
    assert!(csv1.starts_with("State,Count,Simulated Ratio,Simulated Std,Predicted Ratio,Predicted Std\n"));
    assert!(csv1.contains("\nGHZ,1,") && csv1.contains("\nArbitrary,2,"));

    let manifest = read_json(dirs[0].path().join("manifest.json"));
    let skipped = manifest["parameters"]["skipped"].as_array().unwrap();
    assert_eq!(skipped.len(), 2, "QAOA and VQE have no files: {skipped:?}");

    let (_, r3) = table(dirs[2].path(), &["--seed", "5"]);
    let random = |r: &Value| r.get("seed").is_some();
    for (a, b) in r1.iter().zip(&r3) {
        assert_eq!(random(a), random(b));
        if random(a) {
            assert_ne!(a["simulated_ratio"], b["simulated_ratio"]);
        } else {
            assert_eq!(a, b);
        }
    }
}

#[test]
fn profile_env_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qmemsim"))
        .args(["table", "--profile", "paper", "--ensemble", "1", "--out"])
        .arg(dir.path())
        .env("QMEMSIM_PROFILE", "ci")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = read_json(dir.path().join("manifest.json"));
    assert_eq!(manifest["parameters"]["table"]["n_qubits"], 6);

    let o = Command::new(env!("CARGO_BIN_EXE_qmemsim"))
        .args(["ghz-sweep", "--out"])
        .arg(dir.path())
        .env("QMEMSIM_PROFILE", "huge")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_groups_by_target() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["sweep", "--ftargets", "0.7,0.75,0.9", "--qubits", "2..4"]);
    let groups: Vec<Value> = std::fs::read_to_string(dir.path().join("sweep.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(groups.len(), 3);
    for (g, ft) in groups.iter().zip([0.7, 0.75, 0.9]) {
        assert_eq!(g["target_fidelity"], ft);
        assert_eq!(g["reports"].as_array().unwrap().len(), 3);
    }
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);

    let o = qmemsim(dir.path(), &["sweep", "--state", "equal:6"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ghz_sweep_and_nh_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["ghz-sweep", "--qubits", "1..4"]);
    assert_eq!(stdout.lines().count(), 4);
    let csv = std::fs::read_to_string(dir.path().join("ghz_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    ok(dir.path(), &["compare-nh", "--state", "fock:8:3", "--model", "qudit:8", "--t-end", "1", "--samples", "10"]);
    let csv = std::fs::read_to_string(dir.path().join("nh_comparison.csv")).unwrap();
    assert!(csv.starts_with("t,lindblad,nh\n"));
    assert_eq!(csv.lines().count(), 1 + 11);
}

#[test]
fn reorder_reports_gain_or_sentinel() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["reorder", "--state", "w:4", "--model", "qudit:16"]);
    assert!(stdout.contains("t_sorted/t_unsorted"));
    let report = read_json(dir.path().join("reorder.json"));
    assert!(report["gain"].as_f64().unwrap() > 1.0);

    let stdout = ok(dir.path(), &["reorder", "--state", "fock:16:9", "--model", "qudit:16"]);
    assert!(stdout.contains("no crossing"));
}
