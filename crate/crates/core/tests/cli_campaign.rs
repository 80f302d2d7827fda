use std::path::Path;
use std::process::{Command, Output};

use lmabo::harness::{run_with, RunConfig};
use lmabo::llm::{MockTransport, RetryPolicy};

fn lmabo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmabo")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const MANIFEST: &str = r#"
schema = 1
output = "records"
problems = ["SixHumpCamel", "Beale"]
strategists = ["EI", "PosSTD"]
seeds = [0, 1, 2]

[defaults]
budget = 15
"#;

fn csv_column(csv: &str, method: &str, col: &str) -> f64 {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == col).unwrap();
    let row = lines.find(|l| l.starts_with(&format!("{method},"))).unwrap();
    row.split(',').nth(idx).unwrap().parse().unwrap()
}

#[test]
fn toy_campaign_runs_resumes_and_analyzes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("campaign.toml");
    std::fs::write(&manifest, MANIFEST).unwrap();
    let m = manifest.to_str().unwrap();

    let plan = lmabo(&["run", "--manifest", m, "--dry-run"]);
    assert!(plan.status.success());
    assert!(stdout(&plan).starts_with("plan: 12 cells"));

    let first = lmabo(&["run", "--manifest", m, "--parallel", "4"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(stdout(&first).contains("12 planned, 0 already finished, 12 executed, 0 failed"));
    let records = dir.path().join("records");
    let snapshot = |p: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(p).unwrap().map(|e| e.unwrap().path()).collect();
        v.sort();
        v.into_iter().map(|f| std::fs::read(f).unwrap()).collect::<Vec<_>>()
    };
    let before = snapshot(&records);
    assert_eq!(before.len(), 12);

    let again = lmabo(&["run", "--manifest", m]);
    assert!(again.status.success());
    assert!(stdout(&again).contains("12 already finished, 0 executed"));
    assert_eq!(snapshot(&records), before);

    let out = dir.path().join("report");
    let rec = records.to_str().unwrap();
    let analyzed = lmabo(&["analyze", "--records", rec, "--reference", "EI", "--out", out.to_str().unwrap()]);
    assert!(analyzed.status.success(), "{}", String::from_utf8_lossy(&analyzed.stderr));
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(csv.starts_with("# lmabo summary schema 1\n"));
    assert!(csv_column(&csv, "EI", "mean_auc") < csv_column(&csv, "PosSTD", "mean_auc"), "{csv}");
    assert!(out.join("report.json").exists() && out.join("tests.txt").exists());

    let missing_ref = lmabo(&["analyze", "--records", rec, "--reference", "UCB", "--out", out.to_str().unwrap()]);
    assert_eq!(missing_ref.status.code(), Some(2));
}

#[test]
fn invalid_inputs_exit_nonzero_without_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("bad.toml");
    std::fs::write(&manifest, MANIFEST.replace("\"Beale\"", "\"Rosenbrok\"")).unwrap();
    let o = lmabo(&["run", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Rosenbrok"));
    assert!(!dir.path().join("records").exists());

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = lmabo(&["analyze", "--records", empty.to_str().unwrap(), "--reference", "EI", "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let o = lmabo(&["transcript", "--run", "nope", "--records", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn transcript_prints_every_persisted_turn() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = RunConfig::new("Beale", "LLM".parse().unwrap(), 4);
    c.budget = Some(4);
    c.output_dir = Some(dir.path().to_path_buf());
    c.transport.retry = RetryPolicy::immediate(1);
    let problem = c.resolve_problem().unwrap();
    let replies = ["Ready.", "EI: start broad", "TS: sample", "no idea", "LogEI: refine"];
    run_with(&c, &problem, Some(Box::new(MockTransport::scripted(replies)))).unwrap();

    let path = c.transcript_path(&problem).unwrap();
    let lines = std::fs::read_to_string(&path).unwrap().lines().count();
    let o = lmabo(&["transcript", "--run", &c.run_id(&problem), "--records", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("--- [")).count(), lines);
    assert_eq!(text.matches(">>> decision:").count(), 4);
    assert!(text.contains(">>> decision: UCB (fallback)"));
}

#[test]
fn list_commands() {
    let o = lmabo(&["list", "problems"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1 + 15);
    let o = lmabo(&["list", "strategists"]);
    let text = stdout(&o);
    for tag in ["PI", "LogPI", "EI", "LogEI", "UCB", "PosMean", "PosSTD", "TS", "KG", "PES", "MES", "JES", "GP-Hedge", "ESP", "LLM"] {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(tag)), "{tag}");
    }
}
