use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::arbiter::{self, Filtered};
use crate::bindings;
use crate::corpus::{Embedder, VectorIndex};
use crate::domain::{
    ClinicalSchema, ConfigError, CostCounters, EvidenceReport, Question, RetrievalTrajectory, RoundRecord, RunConfig,
    TaskKind,
};
use crate::explorer::{self, LoopError, Retriever};
use crate::interpreter::{self, SchemaParseFailure};
use crate::llm::{GatewayError, LlmGateway, Meter};
use crate::stopwatch::Stopwatch;

use super::metrics::RunMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Interpret,
    Explore,
    Adjudicate,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionFailure {
    pub stage: Stage,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub partial_rounds: Vec<RoundRecord>,
}

/// Everything recorded about one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub task_kind: TaskKind,
    pub variant: String,
    pub schema: Option<ClinicalSchema>,
    pub schema_degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_failure: Option<SchemaParseFailure>,
    pub initial_query: Option<String>,
    pub trajectory: Option<RetrievalTrajectory>,
    pub evidence_ids: Vec<String>,
    pub report: Option<EvidenceReport>,
    pub report_fallback: bool,
    #[serde(default)]
    pub report_backfilled: bool,
    #[serde(default)]
    pub dropped_source_ids: Vec<String>,
    pub prediction: Option<String>,
    pub abstained: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_raw: Option<String>,
    pub answer_key: Option<String>,
    pub correct: bool,
    pub cost: CostCounters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<QuestionFailure>,
}

impl QuestionRecord {
    fn new(q: &Question, variant: &str) -> Self {
        QuestionRecord {
            id: q.id.clone(),
            task_kind: q.task_kind,
            variant: variant.to_string(),
            schema: None,
            schema_degraded: false,
            schema_failure: None,
            initial_query: None,
            trajectory: None,
            evidence_ids: Vec::new(),
            report: None,
            report_fallback: false,
            report_backfilled: false,
            dropped_source_ids: Vec::new(),
            prediction: None,
            abstained: false,
            answer_raw: None,
            answer_key: q.answer_key.clone(),
            correct: false,
            cost: CostCounters::default(),
            error: None,
        }
    }
}

/// Shared, read-only state for answering questions: configuration, model
/// gateway, index and query encoder. Safe to use from many threads.
pub struct Engine {
    config: RunConfig,
    gateway: LlmGateway,
    index: VectorIndex,
    embedder: Box<dyn Embedder>,
}

impl Engine {
    pub fn new(
        config: RunConfig,
        gateway: LlmGateway,
        index: VectorIndex,
        embedder: Box<dyn Embedder>,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Engine {
            config,
            gateway,
            index,
            embedder,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn retriever(&self) -> Retriever<'_> {
        Retriever::new(&self.index, self.embedder.as_ref())
    }

    /// Runs interpret -> explore -> adjudicate -> answer for one question.
    /// Failures are captured in the record rather than returned.
    pub fn run_question(&self, q: &Question) -> QuestionRecord {
        let cfg = &self.config;
        let watch = Stopwatch::start(cfg.timing);
        let mut meter = Meter::new(q.id.clone(), cfg.budget);
        let mut rec = QuestionRecord::new(q, cfg.ablation.label());
        if let Err(failure) = self.pipeline(q, &mut meter, &mut rec) {
            warn!(question = %q.id, stage = ?failure.stage, error = %failure.message, "question failed");
            rec.error = Some(failure);
        }
        rec.correct = match (&rec.prediction, &rec.answer_key) {
            (Some(p), Some(k)) => p == k,
            _ => false,
        };
        rec.cost = meter.counters;
        rec.cost.wall_ms = watch.elapsed_ms();
        rec
    }

    fn pipeline(&self, q: &Question, meter: &mut Meter, rec: &mut QuestionRecord) -> Result<(), QuestionFailure> {
        let cfg = &self.config;
        let fail = |stage| {
            move |e: GatewayError| QuestionFailure {
                stage,
                message: e.to_string(),
                partial_rounds: Vec::new(),
            }
        };

        let (schema, initial_query) = if cfg.ablation.skip_interpreter {
            rec.schema_degraded = true;
            (ClinicalSchema::degraded(&q.stem), q.stem.trim().to_string())
        } else {
            let interp = interpreter::interpret(&self.gateway, cfg, q, meter).map_err(fail(Stage::Interpret))?;
            rec.schema_degraded = interp.degraded;
            rec.schema_failure = interp.failure;
            let query = if interp.degraded {
                q.stem.trim().to_string()
            } else {
                interpreter::linearize(&interp.schema)
            };
            (interp.schema, query)
        };
        rec.schema = Some(schema.clone());
        rec.initial_query = Some(initial_query.clone());

        let outcome = explorer::run_loop(&self.gateway, self.retriever(), cfg, &schema, &initial_query, meter)
            .map_err(|e| match e {
                LoopError::Index(err) => QuestionFailure {
                    stage: Stage::Explore,
                    message: err.to_string(),
                    partial_rounds: Vec::new(),
                },
                LoopError::Gateway { source, rounds, .. } => QuestionFailure {
                    stage: Stage::Explore,
                    message: source.to_string(),
                    partial_rounds: rounds,
                },
            })?;
        rec.evidence_ids = outcome.evidence.ids().map(str::to_string).collect();
        rec.trajectory = Some(outcome.trajectory);

        let grounding = if cfg.ablation.skip_adjudication {
            bindings::summaries(outcome.evidence.docs(), cfg.summary_chars)
        } else {
            let adj = arbiter::adjudicate(
                &self.gateway,
                cfg,
                q,
                &schema,
                &outcome.all_queries,
                &outcome.evidence,
                meter,
            )
            .map_err(fail(Stage::Adjudicate))?;
            let Filtered { dropped_ids, .. } = adj.filtered;
            rec.dropped_source_ids = dropped_ids;
            rec.report_fallback = adj.fallback;
            rec.report_backfilled = adj.backfilled;
            let text = bindings::report(&adj.report);
            rec.report = Some(adj.report);
            text
        };

        let ans = arbiter::answer(&self.gateway, cfg, q, &grounding, meter).map_err(fail(Stage::Answer))?;
        rec.abstained = ans.abstained();
        rec.prediction = ans.label.map(|l| l.as_str().to_string());
        rec.answer_raw = Some(ans.raw);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub records: Vec<QuestionRecord>,
    pub metrics: RunMetrics,
}

/// Answers every question on a pool of `config.workers` threads. Records
/// come back in dataset order regardless of completion order.
pub fn run_benchmark(engine: &Engine, questions: &[Question]) -> BenchmarkRun {
    let workers = engine.config.workers.clamp(1, questions.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<QuestionRecord>>> = Mutex::new(vec![None; questions.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(q) = questions.get(i) else { break };
                let rec = engine.run_question(q);
                slots.lock().unwrap()[i] = Some(rec);
            });
        }
    });
    let records: Vec<QuestionRecord> = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every question produces a record"))
        .collect();
    let metrics = RunMetrics::from_records(&records);
    info!(
        n = metrics.n_questions,
        accuracy = metrics.accuracy,
        calls_per_q = metrics.calls_per_q,
        "benchmark finished"
    );
    BenchmarkRun { records, metrics }
}
