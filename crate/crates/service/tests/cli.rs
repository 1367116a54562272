use std::process::Command;

use ric_core::campaign::{read_manifest, read_summary, NON_ML};

fn ric() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ric"))
}

#[test]
fn run_then_compare_non_ml_campaign() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("scenario.toml");
    std::fs::write(&cfg_path, "[topology]\nue_count = 20\n[evaluation]\nslots = 120\nmeasure_from = 20\n").unwrap();
    let out = dir.path().join("nonml");

    let status = ric()
        .args(["run", "--mode", "non_ml", "--seeds", "3,4", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let manifest = read_manifest(&out).unwrap();
    assert!(manifest.complete);
    assert_eq!(manifest.completed_seeds, vec![3, 4]);
    let summary = read_summary(&out).unwrap();
    assert_eq!(summary.runs[NON_ML].throughput_mbps.n, 2);
    assert!(out.join("seed-3").join(format!("{NON_ML}.csv")).exists());

    let cmp = ric().arg("compare").arg("--runs").arg(&out).output().unwrap();
    assert!(cmp.status.success());
    let text = String::from_utf8(cmp.stdout).unwrap();
    assert!(text.lines().any(|l| l.contains(NON_ML)), "{text}");
}

#[test]
fn bad_mode_is_rejected_by_argument_parsing() {
    let out = ric().args(["run", "--mode", "single:xx", "--seeds", "1"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("xx"));
}

#[test]
fn unknown_config_key_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.toml");
    std::fs::write(&cfg_path, "[topology]\nue_cnt = 20\n").unwrap();
    let out = ric().args(["run", "--mode", "non_ml", "--seeds", "1", "--config"]).arg(&cfg_path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ue_cnt"));
}
