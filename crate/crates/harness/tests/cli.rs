use std::path::PathBuf;
use std::process::Command;

fn harness() -> Command {
    Command::new(env!("CARGO_BIN_EXE_harness"))
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn scenario_files_pass() {
    let dir = scenarios();
    let out = harness()
        .arg("scenario")
        .args(["store.json", "store_instructor_first.json", "empty.json"].map(|f| dir.join(f)))
        .output()
        .unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{stdout}");
}

#[test]
fn diverging_scenario_fails_with_its_step() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenarios().join("store.json")).unwrap()).unwrap();
    v["steps"][6]["expect"]["stack"] = serde_json::json!(["A1"]);
    let path = tmp.path().join("broken.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let out = harness().arg("scenario").arg(&path).output().unwrap();
    assert!(!out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("FAIL") && stdout.contains("step 6"), "{stdout}");
}

#[test]
fn run_writes_a_report_and_judges_it() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("preps.json");
    let out = harness()
        .args(["run", "--category", "prepositions", "--seed", "2", "--runs", "1", "--report"])
        .arg(&path)
        .output()
        .unwrap();
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(out.status.success(), "{stderr}");
    assert!(stderr.lines().any(|l| l.starts_with("PASS  prepositions")), "{stderr}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["category"], "prepositions");
    assert_eq!(report["runs"].as_array().unwrap().len(), 1);
}

#[test]
fn acceptance_subcommand_passes() {
    let out = harness().args(["acceptance", "--seed", "1", "--runs", "3"]).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 17, "{stdout}");
    assert!(!stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn bad_config_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("cfg.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = harness().args(["run", "--category", "nouns", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
