use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn planform<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_planform")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn diff_of_a_file_with_itself_matches() {
    let p = fixture("p001.pddl");
    let out = planform([PathBuf::from("diff"), p.clone(), p]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["match"], true);
}

#[test]
fn diff_of_different_problems_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("p001.pddl")).unwrap().replacen("    (on-table block2)\n", "", 1);
    let cand = dir.path().join("cand.pddl");
    std::fs::write(&cand, text).unwrap();
    let out = planform([PathBuf::from("diff"), cand, fixture("p001.pddl")]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["match"], false);
    assert_eq!(v["flags"]["missing_init"], true);
    assert_eq!(v["flags"]["missing_goal"], false);
}

#[test]
fn eight_step_plan_validates() {
    let out = planform([PathBuf::from("validate"), fixture("domain.pddl"), fixture("p001.pddl"), fixture("plan.txt")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["valid"], true);
    assert_eq!(v["length"], 8);
}

#[test]
fn truncated_plan_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("short.txt");
    std::fs::write(&plan, "(unstack block1 block3)\n(putdown block1)\n").unwrap();
    let out = planform([PathBuf::from("validate"), fixture("domain.pddl"), fixture("p001.pddl"), plan]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["failure_reason"]["kind"], "goal_unmet");
}

#[test]
fn solve_methods_agree_on_length() {
    for method in ["heuristic", "bfs"] {
        let out = planform([
            "solve".into(),
            fixture("p001.pddl").into_os_string(),
            "--method".into(),
            method.into(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 8, "{method}");
    }
}

#[test]
fn dnc_with_oracle_reports_full_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = planform([
        "run".into(),
        "--strategy".into(),
        "dnc".into(),
        "--backend".into(),
        "mock-oracle".into(),
        "--suite".into(),
        "xxl".into(),
        "--per-size".into(),
        "2".into(),
        "--parallelism".into(),
        "4".into(),
        "--out".into(),
        run.clone().into_os_string(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(run.join("report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert_eq!(row.split(',').nth(5), Some("100.0"), "{row}");
    }

    let first = std::fs::read(run.join("report.csv")).unwrap();
    let again = planform([PathBuf::from("report"), run.clone()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read(run.join("report.csv")).unwrap(), first);
    assert_eq!(std::fs::read_to_string(run.join("records.jsonl")).unwrap().lines().count(), 10);
}

#[test]
fn generated_suite_runs_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    let gen = planform([
        "gen".into(),
        "--family".into(),
        "unravel".into(),
        "--sizes".into(),
        "5,30".into(),
        "--per-size".into(),
        "1".into(),
        "--out".into(),
        suite.clone().into_os_string(),
    ]);
    assert_eq!(gen.status.code(), Some(0));
    assert!(suite.join("manifest.json").exists());
    let run = dir.path().join("run");
    let out = planform([
        "run".into(),
        "--strategy".into(),
        "formalizer".into(),
        "--backend".into(),
        "mock-oracle".into(),
        "--suite".into(),
        suite.into_os_string(),
        "--out".into(),
        run.clone().into_os_string(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("unravel"));
}

#[test]
fn count_prints_exact_values() {
    let out = planform(["count", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["arm_empty"], "501");
}

#[test]
fn errors_are_json_with_exit_two() {
    for args in [vec!["validate", "missing.pddl", "x", "y"], vec!["frobnicate"], vec!["run", "--strategy", "dnc"]] {
        let out = planform(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
        assert!(err["message"].is_string());
    }
}

#[test]
fn bad_backend_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("backend.toml");
    std::fs::write(&cfg, "[backend]\nmodel = \"m\"\nbase_url = \"http://127.0.0.1:9/v1\"\napi_key_env = \"PLANFORM_TEST_UNSET_KEY\"\n")
        .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_planform"))
        .args(["run", "--strategy", "planner", "--suite", "xxl", "--per-size", "1", "--backend"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("run"))
        .env_remove("PLANFORM_TEST_UNSET_KEY")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PLANFORM_TEST_UNSET_KEY"));
}
