use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn walshu(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_walshu"))
        .current_dir(dir)
        .env_remove("WALSHU_OUTPUT_DIR")
        .args(args)
        .output()
        .expect("runs")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn lemma1_report_has_four_passing_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = walshu(dir.path(), &["--out", "o", "verify-lemma1", "--K", "1", "--M", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&dir.path().join("o/lemma1_report.json"));
    let checks = r["report"]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 4);
    assert!(checks.iter().all(|c| c["pass"] == true));
    assert_eq!(r["report"]["mode"], "paper");
}

#[test]
fn usage_errors_leave_no_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--out", "o", "verify-lemma2", "--eps", "nine tenths", "--gamma", "1"][..],
        &["--out", "o", "verify-lemma1", "--K", "1"][..],
        &["--out", "o", "no-such-command"][..],
        &["--out", "o", "approximate", "--target", "missing.json"][..],
    ] {
        let out = walshu(dir.path(), args);
        assert!(!out.status.success(), "{args:?}");
        assert!(!dir.path().join("o").exists(), "{args:?}");
    }
}

#[test]
fn infeasible_schedule_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = walshu(
        dir.path(),
        &["--out", "o", "verify-lemma2", "--eps", "9/10", "--gamma", "1", "--delta-l", "0", "--delta-K", "1", "--q", "2"],
    );
    assert_eq!(out.status.code(), Some(1));
    let r = report(&dir.path().join("o/lemma2_report.json"));
    assert!(r["infeasible"].as_str().unwrap().contains("stage 2"));
}

#[test]
fn approximate_writes_one_row_per_stage() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("target.json"), r#"[{"l":0,"K":1,"value":"3"},{"l":1,"K":1,"value":"-1"}]"#).unwrap();
    let out = walshu(dir.path(), &["--out", "o", "approximate", "--target", "target.json", "--depth", "3"]);
    // the toy stages do not lower this target's error at every step
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/convergence.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "q,nu_q,N,weighted_error,weighted_error_decimal,bound,pass,mode");
    assert_eq!(lines.len(), 4);
    let rows: Value = report(&dir.path().join("o/convergence.json"));
    assert_eq!(rows.as_array().unwrap().len(), 3);
}

#[test]
fn config_file_and_environment_choose_the_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"J_max": 22, "index_bit_cap": 4096, "cell_limit": 65536, "enumeration": {"count": 3}, "seed": 5, "output_dir": "from_config"}"#,
    )
    .unwrap();
    let out = walshu(dir.path(), &["--config", "run.json", "build-weight"]);
    assert!(dir.path().join("from_config/weight.json").exists(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&dir.path().join("from_config/weight_report.json"));
    assert_eq!(r["config"]["seed"], 5);
    assert_eq!(r["inputs"]["M_max"], 3);

    let out = Command::new(env!("CARGO_BIN_EXE_walshu"))
        .current_dir(dir.path())
        .env("WALSHU_OUTPUT_DIR", "from_env")
        .args(["--config", "run.json", "verify-lemma1", "--K", "0", "--M", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from_env/lemma1_report.json").exists());
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    for o in ["a", "b"] {
        walshu(dir.path(), &["--out", o, "--seed", "3", "build-universal", "--m-max", "4"]);
    }
    for f in ["universal.json", "universal_report.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn bench_writes_the_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = walshu(dir.path(), &["--out", "o", "bench-fwht", "--levels", "4,6", "--reps", "1"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("o/bench_fwht.csv")).unwrap();
    assert!(csv.starts_with("J,path,nanos_per_transform\n"));
    assert_eq!(csv.lines().count(), 5);
}
