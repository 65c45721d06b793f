use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures/q0024")
        .join(name)
}

fn evloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evloop"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn s(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_run_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let index = tmp.path().join("index");
    let out = evloop(&["ingest", "--corpus", s(&fixture("corpus.jsonl")), "--index", s(&index)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(manifest["doc_count"], 20);

    let run_dir = tmp.path().join("run");
    let out = evloop(&[
        "run",
        "--dataset",
        s(&fixture("dataset.jsonl")),
        "--task",
        "mcq4",
        "--index",
        s(&index),
        "--mock-script",
        s(&fixture("script.jsonl")),
        "--k",
        "3",
        "--frozen-time",
        "--out",
        s(&run_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("100.00"));
    let records = std::fs::read_to_string(run_dir.join("records.jsonl")).unwrap();
    let rec: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(rec["prediction"], "D");
    assert_eq!(rec["trajectory"]["T"], 2);
    assert_eq!(rec["trajectory"]["termination"], "sufficient");
    for f in ["trajectories.jsonl", "reports.jsonl", "summary.txt"] {
        assert!(run_dir.join(f).exists(), "{f}");
    }

    let before = std::fs::read(run_dir.join("summary.json")).unwrap();
    std::fs::remove_file(run_dir.join("summary.json")).unwrap();
    let out = evloop(&["report", "--run", s(&run_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(run_dir.join("summary.json")).unwrap(), before);
}

#[test]
fn ask_prints_pipeline_state() {
    let out = evloop(&[
        "ask",
        "--question",
        "What organism causes pneumonia on hospital day 7?",
        "--option",
        "A=Streptococcus pneumoniae",
        "--option",
        "B=Mycobacterium tuberculosis",
        "--option",
        "C=Haemophilus influenzae",
        "--option",
        "D=Staphylococcus aureus",
        "--corpus",
        s(&fixture("corpus.jsonl")),
        "--mock-script",
        s(&fixture("script.jsonl")),
        "--k",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // the script pins its replies to question 0024, so they are not served here
    assert_eq!(v["error"]["stage"], "interpret");
    assert!(v["answer"].is_null());
}

#[test]
fn run_requires_a_corpus_or_index() {
    let tmp = tempfile::tempdir().unwrap();
    let out = evloop(&[
        "run",
        "--dataset",
        s(&fixture("dataset.jsonl")),
        "--task",
        "mcq4",
        "--out",
        s(tmp.path()),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--index or --corpus"));
}

#[test]
fn api_key_is_not_a_flag() {
    let out = evloop(&["run", "--help"]);
    let help = String::from_utf8_lossy(&out.stdout);
    assert!(help.contains("--base-url"));
    assert!(!help.contains("--api-key"));
}

#[test]
fn malformed_dataset_lines_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.jsonl");
    let good = std::fs::read_to_string(fixture("dataset.jsonl")).unwrap();
    std::fs::write(&data, format!("{{\"id\":\"x\",\"question\":\"q\"}}\n{good}")).unwrap();
    let out = evloop(&[
        "run",
        "--dataset",
        s(&data),
        "--task",
        "mcq4",
        "--corpus",
        s(&fixture("corpus.jsonl")),
        "--mock-script",
        s(&fixture("script.jsonl")),
        "--k",
        "3",
        "--out",
        s(&tmp.path().join("run")),
    ]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("d.jsonl:1: rejected"), "{err}");
    assert!(err.contains("loaded 1 question(s), rejected 1"), "{err}");
}
