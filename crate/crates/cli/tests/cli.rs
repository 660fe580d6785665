use std::process::{Command, Output};

fn crossing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossing"))
        .args(args)
        .env_remove("CROSSING_SPACE")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn counts_summary_lines() {
    let o = crossing(&["counts", "--profile", "profile-1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().last(), Some("290304 / 331776 (87.5%)"));

    let o = crossing(&["counts", "--profile", "profile-4", "--fast"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().last(), Some("147456 / 331776 (44.4%)"));
    // header plus k = 0..=k_max plus the summary
    assert!(out.lines().count() >= 3);
}

#[test]
fn profile_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = crossing_core::presets::builtin_profile("profile-3").unwrap();
    p.profile_id = "mine".into();
    let path = dir.path().join("mine.json");
    std::fs::write(&path, crossing_core::document::serialize_profile(&p)).unwrap();
    let o = crossing(&["counts", "--profile", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().last(), Some("16384 / 331776 (4.9%)"));
}

#[test]
fn sample_reports_substitution() {
    let args = ["sample", "--profile", "profile-3", "--cd", "0.1,0.6", "--n", "3", "--seed", "11"];
    let o = crossing(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("using nearest level 1/3"), "{}", stderr(&o));
    let plan: crossing_core::SessionPlan = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(plan.steps.len(), 6);
    assert_eq!(plan.substitutions.len(), 1);
    assert_eq!(stdout(&crossing(&args)), stdout(&o));
}

#[test]
fn exit_codes() {
    assert_eq!(crossing(&["--help"]).status.code(), Some(0));
    assert_eq!(crossing(&["--version"]).status.code(), Some(0));
    assert_eq!(crossing(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(crossing(&["counts"]).status.code(), Some(1));

    let o = crossing(&["counts", "--profile", "no-such-profile"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown profile"));

    let o = crossing(&["sample", "--profile", "profile-1", "--cd", "1.5"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"profile_id\": 3}").unwrap();
    assert_eq!(crossing(&["counts", "--profile", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(crossing(&["--space", bad.to_str().unwrap(), "schema"]).status.code(), Some(2));
}

#[test]
fn analyze_writes_requested_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("figs");
    let o = crossing(&["analyze", "--profile", "profile-1", "--out", out.to_str().unwrap(), "--format", "csv,svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("profile-1.csv").is_file());
    assert!(out.join("profile-1.svg").is_file());
    assert!(!out.join("profile-1.json").exists());
    assert!(stdout(&o).contains("87.5%"));

    let o = crossing(&["analyze", "--profile", "profile-1", "--out", out.to_str().unwrap(), "--format", "png"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn variance_and_schema() {
    let o = crossing(&["variance", "--profile", "profile-1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("low-end collapse: 1/9"));

    let o = crossing(&["schema"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("total scenarios: 331776"));
}

#[test]
fn repro_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = crossing(&["paper-repro", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    assert!(dir.path().join("profile-2.svg").is_file());
}
