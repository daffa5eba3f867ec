use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn flatbill(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatbill"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn map_check_passes_on_default_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = flatbill(dir.path(), &["map-check", "--points", "400"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["details"]["pass"], true);
    assert_eq!(summary["details"]["checks"]["cone_violations"], 0);
}

#[test]
fn unknown_override_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = flatbill(dir.path(), &["orbit", "--set", "gamma=3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("table.json");
    fs::write(&cfg, r#"{"beta": 6, "scatterer_radus": 1}"#).unwrap();
    let o = flatbill(&dir.path().join("out"), &["table-info", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scatterer_radus"));
}

#[test]
fn invalid_value_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = flatbill(dir.path(), &["table-info", "--set", "epsilon0=0.7"]);
    assert_eq!(o.status.code(), Some(2));
    let o = flatbill(dir.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn partial_config_file_keeps_defaults_and_threads_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("table.json");
    fs::write(&cfg, r#"{"beta": 6, "threads": 1}"#).unwrap();
    let out = dir.path().join("out");
    let o = flatbill(&out, &["table-info", "--m-max", "3", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["table"]["beta"], 6.0);
    assert_eq!(m["config"]["table"]["rect_width"], 3.0);
    assert_eq!(m["config"]["threads"], 1);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let runs = [("a", "1"), ("b", "2")];
    for (name, threads) in runs {
        let out = dir.path().join(name);
        let o = flatbill(&out, &["orbit", "--steps", "500", "--seed", "7", "--set", "mode=rectangle", "--threads", threads]);
        assert_eq!(o.status.code(), Some(0));
        let o = flatbill(&out.join("nb"), &["neighborhood", "--seed", "7", "--samples", "400", "--deltas", "1e-2,1e-3,1e-4", "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(fs::read(a.join("orbit.csv")).unwrap(), fs::read(b.join("orbit.csv")).unwrap());
    assert_eq!(fs::read(a.join("nb/neighborhood.csv")).unwrap(), fs::read(b.join("nb/neighborhood.csv")).unwrap());
    assert_eq!(manifest(&a)["files"], manifest(&b)["files"]);
}

#[test]
fn manifest_hashes_every_output() {
    use sha2::{Digest, Sha256};
    let dir = tempfile::tempdir().unwrap();
    let o = flatbill(dir.path(), &["orbit", "--steps", "50", "--set", "beta=6", "--set", "seed=3"]);
    assert_eq!(o.status.code(), Some(0));
    let m = manifest(dir.path());
    assert_eq!(m["seed"], 3);
    assert_eq!(m["overrides"], serde_json::json!(["beta=6", "seed=3"]));
    let files = m["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["orbit.csv", "summary.json"]);
    for f in files {
        let bytes = fs::read(dir.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
    let csv = fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    assert!(csv.starts_with("schema_version,step,component,r,phi,tau,cells_crossed,tangential\n"));
    assert_eq!(csv.lines().count(), 51);
}

#[test]
fn failure_budget_exceeded_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = flatbill(dir.path(), &["orbit", "--steps", "1000", "--set", "max_flight_cells=1", "--set", "failure_budget=0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn jacobi_sweep_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = flatbill(dir.path(), &["jacobi", "--ks", "16,32,64,128", "--ms", "5,10,20", "--k-fixed", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["jacobi_k.csv", "jacobi_m.csv"] {
        let csv = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(csv.starts_with("schema_version,m,k,Lambda,k_prime,k_doubleprime,H_drift\n"));
    }
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["exponent"].as_f64().unwrap() > 0.0);
}

#[test]
fn fit_windows_take_comma_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let o = flatbill(dir.path(), &["tails", "--which", "rtilde", "--samples", "20000", "--window", "2,32"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["fit_window"], serde_json::json!([2.0, 32.0]));
    let o = flatbill(dir.path(), &["tails", "--window", "2,32,64"]);
    assert_eq!(o.status.code(), Some(2));
}
