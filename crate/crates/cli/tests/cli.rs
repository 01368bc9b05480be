use std::path::Path;
use std::process::Command;

use pmp_cli::experiments::lp::{LpConfig, LpSource};
use pmp_cli::experiments::toy::ToyConfig;
use pmp_cli::{manifest, Experiment};
use pmp_core::lp_export::parse_lp;

fn pmp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pmp")).args(args).output().expect("binary runs")
}

#[test]
fn lp_export_writes_parseable_lp_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = pmp(&["lp-export", "--seed", "3", "--out", out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    let lp = parse_lp(&std::fs::read_to_string(dir.path().join("model.lp")).unwrap()).unwrap();
    assert_eq!(report["variables"].as_u64().unwrap() as usize, lp.num_vars());
    assert_eq!(report["constraints"].as_u64().unwrap() as usize, lp.num_rows());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn replay_subcommand_reproduces_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = dir.path().join("bound.json");
    std::fs::write(&cfg, r#"{"model": {"kind": "lattice", "side": 3, "theta": 0.2}, "draws": 20}"#).unwrap();
    let run = pmp(&["bound", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let again = pmp(&["replay", dir.path().join("manifest.json").to_str().unwrap()]);
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
}

#[test]
fn invalid_parameters_exit_nonzero() {
    let run = pmp(&["toy", "--damping", "1.5"]);
    assert!(!run.status.success());
    assert!(!run.stderr.is_empty());
}

#[test]
fn capacity_errors_use_their_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bound.json");
    std::fs::write(&cfg, r#"{"model": {"kind": "lattice", "side": 6, "theta": 0.1}, "draws": 2}"#).unwrap();
    let run = pmp(&["bound", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2), "{}", String::from_utf8_lossy(&run.stderr));
}

fn record(exp: Experiment, dir: &Path) -> manifest::Manifest {
    manifest::run_recorded(exp, Some(dir)).unwrap();
    manifest::load(&dir.join("manifest.json")).unwrap()
}

#[test]
fn manifest_replay_detects_tampered_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::Toy(ToyConfig { iterations: 3, eval_samples: 200, ..ToyConfig::default() });
    let mut m = record(exp, dir.path());
    assert!(manifest::replay(&m, None).unwrap().is_exact());
    m.outputs.insert("report.json".into(), "0".repeat(64));
    let r = manifest::replay(&m, None).unwrap();
    assert_eq!(r.mismatched, vec!["report.json".to_string()]);
}

#[test]
fn manifest_replay_rejects_changed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = tempfile::tempdir().unwrap();
    let model = inputs.path().join("input.json");
    std::fs::write(&model, r#"{"w": [[0.0, 1.0], [1.0, 0.0]], "b": [0.5, -0.5]}"#).unwrap();
    let exp = Experiment::LpExport(LpConfig {
        model: Some(model.clone()),
        source: LpSource::Ising { n: 2, w_range: 1.0, b_range: 1.0 },
        ..LpConfig::default()
    });
    let m = record(exp, dir.path());
    assert!(manifest::replay(&m, None).unwrap().is_exact());
    std::fs::write(&model, r#"{"w": [[0.0, 2.0], [2.0, 0.0]], "b": [0.5, -0.5]}"#).unwrap();
    assert!(manifest::replay(&m, None).is_err());
}
