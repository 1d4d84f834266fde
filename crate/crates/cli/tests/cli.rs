use std::process::{Command, Output};

use serde_json::Value;

fn qot(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qot"));
    cmd.args(args).env_remove("QOT_SEED");
    if let Some(s) = seed_env {
        cmd.env("QOT_SEED", s);
    }
    cmd.output().expect("qot runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json document")
}

#[test]
fn invalid_parameters_exit_with_two() {
    let out = qot(&["run", "--n", "4", "--m", "1", "--N", "41", "--trials", "10"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());

    let out = qot(&["bounds", "--n", "3", "--m", "3"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_verdict_exits_with_one() {
    let out = qot(&["channel", "--photons", "50", "--seed", "3"], None);
    let doc = json(&out);
    let pass = doc["pass"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if pass { 0 } else { 1 }));

    let out = qot(&["privacy-test", "--n", "3", "--m", "1", "--N", "6", "--trials-per-choice", "200"], None);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn seed_can_come_from_the_environment() {
    let base = ["run", "--n", "3", "--m", "1", "--N", "6", "--trials", "500"];
    let from_env = qot(&base, Some("42"));
    let mut explicit = base.to_vec();
    explicit.extend(["--seed", "42"]);
    let from_flag = qot(&explicit, None);
    assert_eq!(from_env.stdout, from_flag.stdout);
    assert_eq!(json(&from_env)["seed"], 42);
    assert_ne!(from_env.stdout, qot(&base, None).stdout);
}

#[test]
fn fixed_bits_and_choices_are_echoed() {
    let out = qot(
        &["run", "--n", "3", "--m", "1", "--N", "6", "--trials", "300", "--bits", "1,0,1", "--choices", "2"],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["config"]["inputs"], "1,0,1");
    assert_eq!(doc["config"]["choices"], "2");

    let out = qot(&["run", "--n", "3", "--m", "1", "--N", "6", "--choices", "4"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn auto_n_picks_an_admissible_size() {
    let out = qot(&["run", "--n", "2", "--m", "1", "--auto-N", "25", "--trials", "200"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let n = json(&out)["config"]["N"].as_u64().unwrap();
    assert!(n >= 25);
}

#[test]
fn transcript_is_written_as_json_lines() {
    let dir = std::env::temp_dir().join(format!("qot-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("trial.jsonl");
    let out = qot(
        &["run", "--n", "2", "--m", "1", "--N", "6", "--trials", "10", "--transcript", path.to_str().unwrap()],
        None,
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(records.len() >= 12);
    let steps: Vec<u64> = records.iter().map(|r| r["step"].as_u64().unwrap()).collect();
    assert!(steps.windows(2).all(|w| w[0] <= w[1]));
    let outcome: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("trial.jsonl.outcome.json")).unwrap()).unwrap();
    assert!(outcome["status"].is_string());
}

#[test]
fn table_output_lists_verdicts() {
    let out = qot(&["attack", "--strategy", "greedy", "--n", "2", "--m", "1", "--N", "6", "--trials", "2000", "--format", "table"], None);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("PASS adversary_success_rate_vs_exact")));
}

#[test]
fn output_file_matches_stdout_document() {
    let dir = std::env::temp_dir().join(format!("qot-cli-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bounds.json");
    let args = ["bounds", "--n", "4", "--m", "1", "--N", "40"];
    let stdout = qot(&args, None).stdout;
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    assert!(qot(&with_out, None).status.success());
    assert_eq!(std::fs::read(&path).unwrap(), stdout);
}

#[test]
fn oracle_reports_exact_fractions() {
    let doc = json(&qot(&["oracle", "--n", "2", "--m", "1", "--N", "6", "--event", "privacy", "--verify-enumeration"], None));
    assert_eq!(doc["probability"]["numerator"], "15");
    assert_eq!(doc["probability"]["denominator"], "64");
    assert_eq!(doc["pass"], true);
}
