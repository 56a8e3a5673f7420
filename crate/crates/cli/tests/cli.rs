use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn ethsim(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ethsim"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("ETHSIM_THREADS", t),
        None => cmd.env_remove("ETHSIM_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn digest(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn lsw_demo_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ethsim(&["run", "--set", "scenario=lsw-demo", "--set", "seed=5", "--out", out], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("lsw-demo_5.csv")).unwrap();
    assert!(csv.starts_with("quantity,value\n"));
    assert!(csv.contains("quantum_violation,0.5"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("lsw-demo_5.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 5);
    assert_eq!(summary["scenario"], "lsw-demo");
    assert_eq!(summary["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn config_file_and_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"scenario": "pdp-check", "seed": 1, "g": 0.1, "tau": 1.0, "n_modes": 2, "format": "json"}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = ethsim(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let table: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("pdp-check_1.json")).unwrap()).unwrap();
    assert_eq!(table["columns"][2], "computed_dim");
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert_eq!(r[2], r[3]);
        assert_eq!(r[4], true);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs_and_threads() {
    let args = [
        "run",
        "--set",
        "scenario=fluorescence",
        "--set",
        "seed=9",
        "--set",
        "alpha=0.3",
        "--set",
        "Omega=1",
        "--set",
        "dt=0.01",
        "--set",
        "T=2",
        "--set",
        "n_traj=200",
    ];
    let mut hashes = Vec::new();
    for threads in [None, Some("1"), Some("3")] {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args.to_vec();
        a.extend(["--out", dir.path().to_str().unwrap()]);
        let o = ethsim(&a, threads);
        assert!(o.status.success(), "{}", stderr(&o));
        hashes.push((
            digest(&dir.path().join("fluorescence_9.csv")),
            digest(&dir.path().join("fluorescence_9.summary.json")),
        ));
    }
    assert!(hashes.windows(2).all(|w| w[0] == w[1]), "{hashes:?}");
}

#[test]
fn missing_seed_is_a_one_line_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ethsim(&["run", "--set", "scenario=lsw-demo", "--out", dir.path().to_str().unwrap()], None);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert_eq!(e.trim_end().lines().count(), 1, "{e}");
    assert!(e.contains("missing required key: seed"), "{e}");
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    let o = ethsim(&["run", "--set", "scenario=lsw-demo", "--set", "seed=1", "--set", "colour=red"], None);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown keys: colour"), "{}", stderr(&o));

    let o = ethsim(
        &["run", "--set", "scenario=fluorescence", "--set", "seed=1", "--set", "alpha=-1", "--set", "Omega=1"],
        None,
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));

    let o = ethsim(&["run", "--set", "scenario=lsw-demo", "--set", "seed=1"], Some("zero"));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("ETHSIM_THREADS"));
}
