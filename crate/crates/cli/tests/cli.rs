use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stethogate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stethogate"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("cfg.toml");
    fs::write(
        &path,
        "schema_version = 1\nseed = 5\nsynth_subjects = 10\nsynth_duration = 20.0\nf_base = 4\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn full_run_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();

    let o = stethogate(&["synth", "--config", &cfg, "--out", &p("raw"), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = p("raw/manifest.tsv");
    let o = stethogate(&["condition", "--config", &cfg, "--manifest", &manifest, "--out", &p("cond")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = stethogate(&["featurize", "--config", &cfg, "--input", &p("cond"), "--out", &p("feat"), "--fold", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("train\tCAD"), "{stdout}");

    let idx = p("feat/val.idx");
    let o = stethogate(&["evaluate", "--pred", &idx, "--truth", &idx, "--out", &p("eval")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("MCC 1.000000"));
    assert!(dir.path().join("eval/fragment_report.txt").exists());
}

#[test]
fn loss_check_passes() {
    let o = stethogate(&["loss-check", "--batches", "20", "--seed", "3"]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{out}");
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "schema_version = 99\n").unwrap();
    let o = stethogate(&["config", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = stethogate(&["config", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(o.status.code(), Some(1));
    let o = stethogate(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.tsv");
    fs::write(&m, "S1\tMAYBE\t1\tHM:1\tx.wav\n").unwrap();
    let o = stethogate(&["condition", "--manifest", m.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = stethogate(&["evaluate", "--pred", "/nonexistent", "--truth", "/nonexistent", "--out", "/tmp"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_prints_seed_override() {
    let o = stethogate(&["config", "--seed", "42"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("seed = 42"));
}
