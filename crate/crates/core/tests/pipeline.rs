mod common;

use std::sync::Arc;

use evloop::domain::{CacheConfig, ClinicalSchema, RunConfig, TaskKind, Termination};
use evloop::explorer::replay_new_ids;
use evloop::harness::{self, run_benchmark, Stage};
use evloop::interpreter::{interpret, linearize};
use evloop::llm::{CompletionCache, InjectedError, LlmGateway, Meter, MockBackend, Role};

use common::*;

fn pneumonia_case_schema() -> ClinicalSchema {
    ClinicalSchema::new(
        "Infectious etiology & pathogen identification",
        [
            "stroke",
            "HAP/aspiration pneumonia",
            "right-basal crackles",
            "new right consolidation",
            "fever + purulent cough",
        ]
        .map(String::from)
        .to_vec(),
        [
            "62y",
            "hospital day 7",
            "post-stroke aspiration risk",
            "neutrophil predominance",
        ]
        .map(String::from)
        .to_vec(),
        "hospital day 7 post-stroke pneumonia right consolidation most likely causative organism",
    )
    .unwrap()
}

#[test]
fn pneumonia_case_fields_linearize() {
    // fields joined by "; ", list items by ", ", q_init first
    let expected = [
        "hospital day 7 post-stroke pneumonia right consolidation most likely causative organism",
        "Infectious etiology & pathogen identification",
        "stroke, HAP/aspiration pneumonia, right-basal crackles, new right consolidation, fever + purulent cough",
        "62y, hospital day 7, post-stroke aspiration risk, neutrophil predominance",
    ]
    .join("; ");
    assert_eq!(linearize(&pneumonia_case_schema()), expected);
}

#[test]
fn q0024_interpretation_from_script() {
    let data = harness::load_dataset(&fixture("dataset.jsonl"), TaskKind::Mcq4).unwrap();
    let mock = Arc::new(MockBackend::from_jsonl_file(&fixture("script.jsonl")).unwrap());
    let cfg = RunConfig::default();
    let gw = LlmGateway::new(mock.clone(), &cfg);
    let mut meter = Meter::new("0024", cfg.budget);
    let out = interpret(&gw, &cfg, &data.questions[0], &mut meter).unwrap();
    assert!(!out.degraded);
    assert_eq!(out.schema, pneumonia_case_schema());
    assert!(out.schema.constraints.iter().any(|c| c == "hospital day 7"));
    // the prompt carries the question and its options
    let req = &mock.requests()[0];
    assert!(req.prompt.contains("On hospital day 7"));
    assert!(req.prompt.contains("D. Staphylococcus aureus"));
    assert_eq!(req.temperature, 1.0);
}

#[test]
fn prose_interpreter_replies_degrade_after_retry() {
    let mock = Arc::new(MockBackend::new());
    mock.push(Role::Interpreter, "The patient likely has pneumonia.");
    mock.push(Role::Interpreter, "Sorry, I cannot produce JSON.");
    let cfg = RunConfig {
        max_parse_retries: 1,
        ..RunConfig::default()
    };
    let gw = LlmGateway::new(mock.clone(), &cfg);
    let q = mcq("d1", "A");
    let mut meter = Meter::new("d1", cfg.budget);
    let out = interpret(&gw, &cfg, &q, &mut meter).unwrap();
    assert!(out.degraded);
    assert_eq!(out.schema, ClinicalSchema::degraded(&q.stem));
    assert_eq!(out.schema.intent, "unknown");
    assert_eq!(out.failure.unwrap().attempts, 2);
    assert_eq!(meter.counters.llm_calls, 2);
    assert_eq!(mock.remaining(), 0);
}

#[test]
fn recorded_queries_replay_to_the_same_evidence() {
    let mock = Arc::new(MockBackend::new());
    script_never_sufficient(&mock, "r", 3, 3, true, true);
    let cfg = RunConfig {
        t_max: 3,
        k: 5,
        ..frozen_config()
    };
    let eng = engine(cfg, mock, toy_index(60));
    let rec = eng.run_question(&mcq("r", "A"));
    let traj = rec.trajectory.unwrap();
    let replayed = replay_new_ids(eng.retriever(), 5, &traj).unwrap();
    let recorded: Vec<Vec<String>> = traj.rounds.iter().map(|r| r.newly_added.clone()).collect();
    assert_eq!(replayed, recorded);
    assert_eq!(recorded.concat(), rec.evidence_ids);
}

#[test]
fn failures_are_recorded_and_the_batch_continues() {
    let mock = Arc::new(MockBackend::new());
    script_never_sufficient(&mock, "ok1", 2, 1, true, true);
    mock.push_error(Some("bad"), Role::Interpreter, InjectedError::Auth);
    mock.push_for("late", Role::Interpreter, schema_reply("subject 9"));
    mock.push_for("late", Role::Explorer, verdict_reply(false, &followups(1, 2)));
    mock.push_error(Some("late"), Role::Explorer, InjectedError::Fatal);
    script_never_sufficient(&mock, "ok2", 2, 1, true, true);
    let qs = vec![mcq("ok1", "A"), mcq("bad", "A"), mcq("late", "A"), mcq("ok2", "B")];
    let run = run_benchmark(
        &engine(
            RunConfig {
                workers: 2,
                ..frozen_config()
            },
            mock,
            toy_index(30),
        ),
        &qs,
    );
    let ids: Vec<&str> = run.records.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["ok1", "bad", "late", "ok2"]);
    assert_eq!(run.records[1].error.as_ref().unwrap().stage, Stage::Interpret);
    let late = run.records[2].error.as_ref().unwrap();
    assert_eq!(late.stage, Stage::Explore);
    assert_eq!(late.partial_rounds.len(), 1);
    assert!(run.records[0].correct && !run.records[3].correct);
    assert_eq!(run.metrics.n_failed, 2);
    assert_eq!(run.metrics.n_correct, 1);
    assert_eq!(run.metrics.accuracy, 0.25);
}

#[test]
fn worker_count_does_not_change_records() {
    let qs: Vec<_> = (0..12).map(|i| mcq(&format!("w{i}"), "A")).collect();
    let run_with = |workers| {
        let mock = Arc::new(MockBackend::new());
        for q in &qs {
            script_never_sufficient(&mock, &q.id, 2, 2, true, true);
        }
        run_benchmark(
            &engine(
                RunConfig {
                    workers,
                    ..frozen_config()
                },
                mock,
                toy_index(50),
            ),
            &qs,
        )
    };
    let a = run_with(1);
    let b = run_with(6);
    assert_eq!(a.records, b.records);
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn report_recomputes_identical_summary() {
    let mock = Arc::new(MockBackend::new());
    let qs: Vec<_> = (0..5).map(|i| mcq(&format!("s{i}"), ["A", "B"][i % 2])).collect();
    for q in &qs {
        script_never_sufficient(&mock, &q.id, 2, 3, true, true);
    }
    let run = run_benchmark(&engine(frozen_config(), mock, toy_index(40)), &qs);
    let dir = tempfile::tempdir().unwrap();
    harness::write_run(dir.path(), &run.records, &run.metrics, "full").unwrap();
    let stored = harness::read_records(&dir.path().join(harness::RECORDS_FILE)).unwrap();
    assert_eq!(stored, run.records);

    // independent mean over the stored records
    let n = stored.len() as f64;
    let calls = stored.iter().map(|r| r.cost.llm_calls as f64).sum::<f64>() / n;
    let acc = stored.iter().filter(|r| r.prediction == r.answer_key).count() as f64 / n;
    let recomputed = harness::RunMetrics::from_records(&stored);
    assert_eq!(recomputed, run.metrics);
    assert_eq!(recomputed.calls_per_q, calls);
    assert_eq!(recomputed.accuracy, acc);

    let again = tempfile::tempdir().unwrap();
    harness::write_summary(again.path(), &recomputed, "full").unwrap();
    for f in [harness::SUMMARY_JSON, harness::SUMMARY_TXT] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(again.path().join(f)).unwrap()
        );
    }
    assert_eq!(
        harness::read_summary(&dir.path().join(harness::SUMMARY_JSON)).unwrap(),
        run.metrics
    );
}

#[test]
fn persistent_cache_serves_repeat_runs_without_calls() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        cache: CacheConfig {
            enabled: true,
            dir: Some(dir.path().to_path_buf()),
        },
        ..frozen_config()
    };
    let q = mcq("c", "A");
    let first = {
        let mock = Arc::new(MockBackend::new());
        script_never_sufficient(&mock, "c", 2, 1, true, true);
        let gw = LlmGateway::new(mock, &cfg).with_cache(CompletionCache::persistent(dir.path()).unwrap());
        evloop::harness::Engine::new(cfg.clone(), gw, toy_index(30), Box::new(embedder()))
            .unwrap()
            .run_question(&q)
    };
    // an empty script would fail on any live call
    let gw = LlmGateway::new(Arc::new(MockBackend::new()), &cfg)
        .with_cache(CompletionCache::persistent(dir.path()).unwrap());
    let second = evloop::harness::Engine::new(cfg.clone(), gw, toy_index(30), Box::new(embedder()))
        .unwrap()
        .run_question(&q);
    assert!(second.error.is_none(), "{:?}", second.error);
    assert_eq!(first.cost.llm_calls, 5);
    assert_eq!(second.cost.llm_calls, 0);
    assert_eq!(second.cost.cache_hits, 5);
    assert_eq!(second.prediction, first.prediction);
    assert_eq!(
        second.trajectory.as_ref().map(|t| t.rounds.clone()),
        first.trajectory.as_ref().map(|t| t.rounds.clone())
    );
}

#[test]
fn budget_stops_runaway_questions() {
    let mock = Arc::new(MockBackend::new());
    script_never_sufficient(&mock, "b", 5, 1, true, true);
    let mut cfg = RunConfig {
        t_max: 5,
        ..frozen_config()
    };
    cfg.budget.max_calls = 3;
    let rec = engine(cfg, mock, toy_index(30)).run_question(&mcq("b", "A"));
    let err = rec.error.unwrap();
    assert_eq!(err.stage, Stage::Explore);
    assert!(err.message.contains("budget"), "{}", err.message);
    assert_eq!(rec.cost.llm_calls, 3);
}

#[test]
fn audit_parse_failure_ends_loop_as_stagnation() {
    let mock = Arc::new(MockBackend::new());
    mock.push(Role::Interpreter, schema_reply("subject 1"));
    mock.push(Role::Explorer, "not json");
    mock.push(Role::Explorer, "still not json");
    mock.push(Role::Adjudicator, "no report either");
    mock.push(Role::Adjudicator, "nope");
    mock.push(Role::Answerer, "Final Answer: B");
    let rec = engine(frozen_config(), mock, toy_index(30)).run_question(&mcq("p", "B"));
    let traj = rec.trajectory.unwrap();
    assert_eq!(traj.termination, Termination::Stagnation);
    assert!(traj.rounds[0].audit_failed);
    assert!(rec.report_fallback);
    let report = rec.report.unwrap();
    assert_eq!(report.synthesis, "fallback");
    assert_eq!(report.supporting.len(), 3);
    assert!(rec.correct);
}
