//! End-to-end runs of the `cer` binary.

use std::path::Path;
use std::process::{Command, Output};

fn cer(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cer"))
        .args(args)
        .current_dir(dir)
        .env("CER_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn small_dataset(dir: &Path) {
    ok(&cer(
        dir,
        &["simulate", "--seed", "7", "--out", "d", "--synth.sources", "3", "--synth.frames_per_source", "500", "--synth.feature_dim", "4"],
    ));
}

fn write_config(dir: &Path, body: &str) {
    std::fs::write(dir.join("c.json"), body).unwrap();
}

#[test]
fn simulate_then_train_produces_run_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_dataset(dir);
    assert!(dir.join("d/manifest.json").exists());
    write_config(dir, r#"{"schema_version": 1, "train": {"epochs": 2}}"#);
    ok(&cer(dir, &["train", "--mode", "acn", "--dimension", "arousal", "--config", "c.json", "--data", "d", "--out", "r"]));
    for f in ["config.json", "epochs.csv", "checkpoint.json", "run.json"] {
        assert!(dir.join("r").join(f).exists(), "missing {f}");
    }
    let csv = std::fs::read_to_string(dir.join("r/epochs.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "epoch,term1,term2,total,val_ccc_arousal,val_ccc_valence");
    assert_eq!(csv.lines().count(), 3);

    // the stored config alone reproduces the run
    ok(&cer(dir, &["train", "--config", "r/config.json", "--out", "r2"]));
    assert_eq!(std::fs::read(dir.join("r/epochs.csv")).unwrap(), std::fs::read(dir.join("r2/epochs.csv")).unwrap());

    let out = ok(&cer(dir, &["evaluate", "--checkpoint", "r/checkpoint.json", "--data", "d"]));
    assert!(out.starts_with("arousal ccc="), "{out}");
    ok(&cer(dir, &["predict", "--checkpoint", "r/checkpoint.json", "--features", "d/src00/features.csv", "--out", "p.csv"]));
    let p = std::fs::read_to_string(dir.join("p.csv")).unwrap();
    assert_eq!(p.lines().next().unwrap(), "time,arousal");
    assert_eq!(p.lines().count(), 501);
    for method in ["mean", "median", "weighted"] {
        ok(&cer(dir, &["aggregate", "--annotations", "d/src00/annotations_arousal.csv", "--method", method, "--out", "a.csv"]));
    }
    ok(&cer(
        dir,
        &["aggregate", "--annotations", "d/src00/annotations_arousal.csv", "--method", "acn", "--checkpoint", "r/checkpoint.json", "--out", "a.csv"],
    ));
}

#[test]
fn flag_beats_config_with_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_dataset(dir);
    write_config(dir, r#"{"schema_version": 1, "train": {"epochs": 1, "alpha": 0.2, "mode": "baseline"}}"#);
    let out = cer(dir, &["train", "--config", "c.json", "--data", "d", "--out", "r", "--train.alpha", "0.7", "--mode", "acn"]);
    ok(&out);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--train.alpha overrides config value 0.2"), "{stderr}");
    assert!(stderr.contains("--mode overrides config value \"baseline\""), "{stderr}");
    let cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("r/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["train"]["alpha"], 0.7);
    assert_eq!(cfg["train"]["mode"], "acn");
}

#[test]
fn metrics_on_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("a.csv"), "time,value\n0.00,0.1\n0.04,0.5\n0.08,-0.3\n0.12,0.2\n").unwrap();
    std::fs::copy(dir.join("a.csv"), dir.join("b.csv")).unwrap();
    let out = ok(&cer(dir, &["metrics", "--x", "a.csv", "--y", "b.csv"]));
    assert_eq!(out.trim(), "ccc=1.0 loss=0.0");
}

#[test]
fn errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let check = |args: &[&str], kind: &str| {
        let out = cer(dir, args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        let line = stderr.lines().last().unwrap();
        assert!(line.starts_with(&format!("error[{kind}]: ")), "{args:?}: {stderr}");
    };
    check(&["train", "--no-such-flag"], "usage");
    check(&["metrics", "--x", "missing.csv", "--y", "missing.csv"], "io");
    write_config(dir, r#"{"train": {}}"#);
    check(&["simulate", "--config", "c.json", "--out", "x"], "config");
    write_config(dir, r#"{"schema_version": 1, "trian": {}}"#);
    check(&["simulate", "--config", "c.json", "--out", "x"], "config");
    check(&["simulate", "--out", "x", "--synth.annotators", "1"], "config");
    std::fs::write(dir.join("bad.csv"), "time,value\n0.0,0.1\n0.04,abc\n").unwrap();
    check(&["metrics", "--x", "bad.csv", "--y", "bad.csv"], "parse");
    check(&["metrics", "--x", "bad.csv", "--y", "bad.csv", "--train.alpha", "1"], "usage");
}

#[test]
fn help_succeeds_for_every_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ["simulate", "train", "evaluate", "aggregate", "predict", "metrics", "cv", "ab"] {
        let out = ok(&cer(tmp.path(), &[sub, "--help"]));
        assert!(out.contains("--"), "{sub}");
    }
    let out = ok(&cer(tmp.path(), &["--help"]));
    assert!(out.contains("--<section>.<field>"));
}

#[test]
fn cv_writes_table_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_dataset(dir);
    write_config(dir, r#"{"schema_version": 1, "train": {"epochs": 1, "dimensions": "valence"}}"#);
    let out = ok(&cer(dir, &["cv", "--config", "c.json", "--data", "d", "--out", "cv"]));
    assert!(out.contains("Valence & Arousal"), "{out}");
    assert!(dir.join("cv/cv_report.json").exists());
    assert!(dir.join("cv/cv_report.txt").exists());
}
