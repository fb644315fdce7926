use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pwave(dir: &Path, config: Option<&str>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pwave"));
    for var in ["PWAVE_CONFIG", "PWAVE_OUT", "PWAVE_WORKERS", "PWAVE_SEED"] {
        cmd.env_remove(var);
    }
    if let Some(text) = config {
        let path = dir.join("run.cfg");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.arg("--out").arg(dir.join("out")).args(args).output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn malformed_config_exits_3_without_artifacts() {
    for doc in ["n_c 0.3", "no_such_key = 1", "n_x = twelve", "n_c = 1.5"] {
        let dir = tempfile::tempdir().unwrap();
        let out = pwave(dir.path(), Some(doc), &["quench"]);
        assert_eq!(out.status.code(), Some(3), "{doc}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!dir.path().join("out").exists(), "{doc} left artifacts");
    }
}

#[test]
fn unknown_figure_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = pwave(dir.path(), None, &["reproduce", "fig99"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn quench_in_phase_ii_bcs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "n_x = 200\nn_y = 20\nchi_p_i = 2\nchi_p_f = 4\nperiods = 30\n";
    let out = pwave(dir.path(), Some(cfg), &["quench"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("out");
    let class = read_json(&root.join("classification.json"));
    assert_eq!(class["label"], "II-BCS", "{class}");
    let trace = fs::read_to_string(root.join("trace.csv")).unwrap();
    assert!(trace.lines().count() > 100);
    let manifest = read_json(&root.join("manifest.json"));
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["config"]["n_x"], 200);
    // Defaults that were not set still appear in the manifest.
    assert_eq!(manifest["config"]["a_tol"], 1e-2);
    assert_eq!(manifest["config"]["phys"].as_object().map(|m| m.is_empty()), Some(false));
}

#[test]
fn run_dispatches_on_config_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = pwave(dir.path(), Some("command = lax\nchi_p_i = 1\nchi_p_f = 5.9\n"), &["run"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lax = read_json(&dir.path().join("out/lax.json"));
    assert_eq!(lax["label"], "III*", "{lax}");
}

#[test]
fn sweep_manifest_lists_each_cell_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "n_x = 100\nn_y = 10\nperiods = 10\nsweep_chi_i = 1:4:3\nsweep_chi_f = 2:6:3\n";
    let out = pwave(dir.path(), Some(cfg), &["--workers", "2", "sweep"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("out");
    let m = read_json(&root.join("sweep_manifest.json"));
    assert_eq!(m["complete"], true);
    let cells = m["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 9);
    let mut keys: Vec<(String, String)> =
        cells.iter().map(|c| (c["chi_p_i"].to_string(), c["chi_p_f"].to_string())).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 9);
    assert!(cells.iter().all(|c| c["status"] == "ok"));
    let csv = fs::read_to_string(root.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let cfg = "n_x = 60\nn_y = 6\nperiods = 5\nsweep_chi_i = 1:3:2\nsweep_chi_f = 2:5:2\n";
    let run = |workers: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = pwave(dir.path(), Some(cfg), &["--workers", workers, "sweep"]);
        assert_eq!(out.status.code(), Some(0));
        fs::read(dir.path().join("out/sweep.csv")).unwrap()
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn validate_reports_every_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = pwave(dir.path(), None, &["validate"]);
    assert!(matches!(out.status.code(), Some(0)), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("out/validity.json"));
    assert!(v["checks"].as_array().is_some_and(|c| !c.is_empty()), "{v}");
    assert!(dir.path().join("out/validity.csv").exists());
}

#[test]
fn env_vars_mirror_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("env.cfg");
    fs::write(&cfg, "chi_p = 3\nn_x = 100\nn_y = 10\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pwave"))
        .env("PWAVE_CONFIG", &cfg)
        .env("PWAVE_OUT", dir.path().join("envout"))
        .env("PWAVE_SEED", "99")
        .env("PWAVE_WORKERS", "1")
        .arg("ground")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = read_json(&dir.path().join("envout/manifest.json"));
    assert_eq!(m["seed"], 99);
    assert_eq!(m["workers"], 1);
    assert_eq!(m["config"]["chi_p"], 3.0);
}

#[test]
fn reproduce_fig8_labels() {
    let dir = tempfile::tempdir().unwrap();
    let out = pwave(dir.path(), None, &["reproduce", "fig8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let root = dir.path().join("out/fig8");
    let v = read_json(&root.join("verdict.json"));
    assert_eq!(v["pass"], true);
    let csvs = fs::read_dir(&root).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("roots_")).count();
    assert_eq!(csvs, 6);
}

#[test]
fn reruns_are_bit_identical() {
    let cfg = "n_x = 100\nn_y = 10\nchi_p_i = 1\nchi_p_f = 4\nperiods = 8\nensemble = cells\neps_d = 0.01\nchi_d_f = 2\n";
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(pwave(dir.path(), Some(cfg), &["quench"]).status.code(), Some(0));
        fs::read(dir.path().join("out/trace.csv")).unwrap()
    };
    assert_eq!(run(), run());
}
