use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sg_bench::format::{load_policy, save_game};
use sgplan::game_model::single_state_game;
use sgplan::{MatrixGame, MixedStrategy};

fn sg_bench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sg-bench"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn pd_fixture(dir: &Path) {
    let pd = MatrixGame::from_rows(&[[3.0, 0.0], [5.0, 1.0]], &[[3.0, 5.0], [0.0, 1.0]]).unwrap();
    save_game(&single_state_game(pd), &dir.join("pd.json")).unwrap();
}

#[test]
fn sample_size_prints_formula_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = sg_bench(dir.path(), &["sample-size", "--t", "4", "--epsilon", "0.1", "--n", "2", "--c", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "23622\n");
}

#[test]
fn prisoners_dilemma_policy_defects_and_certifies() {
    let dir = tempfile::tempdir().unwrap();
    pd_fixture(dir.path());
    let o = sg_bench(dir.path(), &["solve-finite", "--game", "pd.json", "--horizon", "3", "--out-policy", "p.json"]);
    assert_eq!(o.status.code(), Some(0));
    let (p1, p2) = load_policy(&dir.path().join("p.json")).unwrap();
    for t in 0..3 {
        assert_eq!(p1.get(0, t).unwrap(), &MixedStrategy::pure(2, 1));
        assert_eq!(p2.get(0, t).unwrap(), &MixedStrategy::pure(2, 1));
    }
    let o = sg_bench(dir.path(), &["certify", "--game", "pd.json", "--horizon", "3", "--policy", "p.json"]);
    assert_eq!(o.status.code(), Some(0));
    for line in stdout(&o).lines() {
        let gap: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!(gap <= 1e-8, "{line}");
    }
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = sg_bench(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = sg_bench(dir.path(), &["sample-size", "--t", "1", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(sg_bench(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn bad_game_file_exits_one_naming_the_entry() {
    let dir = tempfile::tempdir().unwrap();
    pd_fixture(dir.path());
    let text = fs::read_to_string(dir.path().join("pd.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["transitions"][0][1][0][0]["p"] = 0.98.into();
    fs::write(dir.path().join("bad.json"), value.to_string()).unwrap();
    let o = sg_bench(dir.path(), &["solve-finite", "--game", "bad.json", "--horizon", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(s=0, i=1, j=0)"));
}

#[test]
fn truncated_discounted_run_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    pd_fixture(dir.path());
    let o = sg_bench(
        dir.path(),
        &["solve-discounted", "--game", "pd.json", "--gamma", "0.9", "--max-iter", "3", "--trace", "d.csv"],
    );
    assert_eq!(o.status.code(), Some(2));
    let trace = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert!(trace.starts_with("iter,delta,v1_s0,v2_s0\n"));
    assert_eq!(trace.lines().count(), 5);
}

#[test]
fn empty_suite_succeeds_without_output_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("suite.json"), r#"{"experiments": []}"#).unwrap();
    let o = sg_bench(dir.path(), &["run-suite", "--config", "suite.json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn failing_experiment_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"experiments": [
        {"name": "ok", "args": ["sample-size", "--t", "2", "--epsilon", "0.5", "--n", "2"]},
        {"name": "broken", "args": ["solve-finite", "--game", "missing.json", "--horizon", "2"]},
        {"name": "never", "args": ["generate", "--states", "2", "--rows", "2", "--cols", "2", "--branching", "1", "--out", "g.json"]}
    ]}"#;
    fs::write(dir.path().join("suite.json"), config).unwrap();
    let o = sg_bench(dir.path(), &["run-suite", "--config", "suite.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment `broken`"));
    assert!(!dir.path().join("g.json").exists());
}

#[test]
fn suite_rerun_is_byte_identical_and_shows_the_trend() {
    let config = r#"{"experiments": [
        {"name": "fixture", "args": ["generate", "--states", "3", "--rows", "2", "--cols", "2", "--branching", "2", "--seed", "1", "--out", "fixture.json"]},
        {"name": "gaps", "args": ["gap-experiment", "--game", "fixture.json", "--horizon", "3", "--m-list", "1,4,16,64", "--seeds", "0..40", "--out", "gaps.csv"]}
    ]}"#;
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("suite.json"), config).unwrap();
        let o = sg_bench(dir.path(), &["run-suite", "--config", "suite.json"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(dir.path().join("gaps.csv")).unwrap()
    };
    let first = run();
    assert_eq!(first, run());

    let mut medians = Vec::new();
    for m in ["1", "4", "16", "64"] {
        let mut errors: Vec<f64> = first
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|cells| cells[0] == m)
            .map(|cells| cells[4].parse().unwrap())
            .collect();
        errors.sort_by(f64::total_cmp);
        medians.push(0.5 * (errors[19] + errors[20]));
    }
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}
