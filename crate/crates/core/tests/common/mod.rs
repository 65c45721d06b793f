#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use evloop::corpus::{ingest, ChunkingConfig, MockEmbedder, VectorIndex};
use evloop::domain::{validate_question, EvidenceDoc, Question, RawQuestion, RunConfig, TaskKind, Timing};
use evloop::harness::Engine;
use evloop::llm::{LlmGateway, MockBackend, Role};

pub const DIM: usize = 256;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/q0024").join(name)
}

pub fn embedder() -> MockEmbedder {
    MockEmbedder::new(DIM, 0)
}

pub fn q0024_index() -> VectorIndex {
    ingest(&[fixture("corpus.jsonl")], ChunkingConfig::default(), &embedder()).unwrap()
}

/// A small synthetic corpus on distinct topics, enough for multi-round runs.
pub fn toy_index(n: usize) -> VectorIndex {
    let e = embedder();
    let docs = (0..n)
        .map(|i| {
            let d = EvidenceDoc::new(
                "toy",
                format!("topic {i}"),
                format!("document {i} about subject {} and {}", i * 7, i % 5),
            );
            let v = e.embed(&format!("{}\n{}", d.title, d.text));
            (d, v)
        })
        .collect();
    VectorIndex::build(DIM, evloop::corpus::Embedder::tag(&e), docs).unwrap()
}

pub fn mcq(id: &str, answer: &str) -> Question {
    let raw = RawQuestion {
        id: id.into(),
        question: format!("question {id}: which organism?"),
        options: ["A", "B", "C", "D"]
            .iter()
            .map(|l| (l.to_string(), format!("option {l}")))
            .collect(),
        answer: Some(answer.into()),
    };
    validate_question(raw, TaskKind::Mcq4).unwrap()
}

pub fn frozen_config() -> RunConfig {
    RunConfig {
        timing: Timing::Frozen,
        workers: 1,
        ..RunConfig::default()
    }
}

pub fn engine(config: RunConfig, backend: Arc<MockBackend>, index: VectorIndex) -> Engine {
    let gateway = LlmGateway::new(backend, &config);
    Engine::new(config, gateway, index, Box::new(embedder())).unwrap()
}

pub fn schema_reply(q_init: &str) -> String {
    serde_json::json!({
        "intent": "pathogen identification",
        "entities": ["pneumonia"],
        "constraints": ["hospital day 7"],
        "q_init": q_init,
    })
    .to_string()
}

pub fn verdict_reply(sufficient: bool, queries: &[String]) -> String {
    serde_json::json!({
        "sufficiency": if sufficient { 1 } else { 0 },
        "gap": if sufficient { "N/A" } else { "missing evidence" },
        "queries": queries,
    })
    .to_string()
}

pub fn report_reply(ids: &[&str]) -> String {
    serde_json::json!({
        "question_focus": "pathogen",
        "key_supporting_evidence": [{"claim": "supports the answer", "source_ids": ids}],
        "key_conflicting_or_limiting_evidence": [],
        "evidence_synthesis": "consistent",
    })
    .to_string()
}

/// `m` distinct follow-up queries for round `t`.
pub fn followups(t: usize, m: usize) -> Vec<String> {
    (0..m)
        .map(|j| format!("follow-up {t}.{j} subject {}", t * 10 + j))
        .collect()
}

/// Scripts one question whose audits are never satisfied and always ask for
/// `m` fresh queries. Covers `rounds` audits.
pub fn script_never_sufficient(
    mock: &MockBackend,
    qid: &str,
    rounds: usize,
    m: usize,
    interpreter: bool,
    adjudicator: bool,
) {
    if interpreter {
        mock.push_for(qid, Role::Interpreter, schema_reply("initial subject query"));
    }
    for t in 1..=rounds {
        mock.push_for(qid, Role::Explorer, verdict_reply(false, &followups(t, m)));
    }
    if adjudicator {
        mock.push_for(qid, Role::Adjudicator, report_reply(&[]));
    }
    mock.push_for(qid, Role::Answerer, "Final Answer: A");
}
