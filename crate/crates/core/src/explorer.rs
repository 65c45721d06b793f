//! Self-evolving retrieval loop: retrieve, accumulate, audit, refine.

use std::collections::HashMap;

use serde_json::Value;
use thiserror::Error;
use tracing::{debug, warn};

use crate::bindings;
use crate::corpus::{Embedder, IndexError, ScoredDoc, VectorIndex};
use crate::domain::{
    ClinicalSchema, CostCounters, EvidenceDoc, EvidenceSet, QueryContext, RetrievalTrajectory, RoundRecord, RunConfig,
    SufficiencyVerdict, Termination,
};
use crate::llm::{json, GatewayError, LlmGateway, Meter, Role, RolePrompt};
use crate::stopwatch::Stopwatch;

/// Gap text recorded when the audit reply could not be parsed.
pub const PARSE_FAILURE_GAP: &str = "parse failure";

/// The searchable corpus together with its query encoder.
#[derive(Clone, Copy)]
pub struct Retriever<'a> {
    pub index: &'a VectorIndex,
    pub embedder: &'a dyn Embedder,
}

impl<'a> Retriever<'a> {
    pub fn new(index: &'a VectorIndex, embedder: &'a dyn Embedder) -> Self {
        Retriever { index, embedder }
    }

    /// Union of the per-query top-k lists. A document found by several
    /// queries keeps its best score; the result is ordered by score
    /// (descending) then doc_id. Adds one retrieval op per query.
    pub fn retrieve_round(
        &self,
        queries: &[String],
        k: usize,
        counters: &mut CostCounters,
    ) -> Result<Vec<ScoredDoc>, IndexError> {
        let mut best: HashMap<String, ScoredDoc> = HashMap::new();
        for q in queries {
            let hits = self.index.topk(self.embedder, q, k)?;
            counters.retrieval_ops += 1;
            for hit in hits {
                match best.get_mut(&hit.doc.doc_id) {
                    Some(prev) if prev.score >= hit.score => {}
                    Some(prev) => prev.score = hit.score,
                    None => {
                        best.insert(hit.doc.doc_id.clone(), hit);
                    }
                }
            }
        }
        let mut out: Vec<ScoredDoc> = best.into_values().collect();
        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.doc.doc_id.cmp(&b.doc.doc_id))
        });
        Ok(out)
    }
}

/// `prev` followed by every candidate whose id it does not already hold,
/// in candidate order.
pub fn merge<'a, I>(prev: &EvidenceSet, candidates: I) -> EvidenceSet
where
    I: IntoIterator<Item = &'a EvidenceDoc>,
{
    prev.merge(candidates)
}

fn flag(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::Number(n) => match n.as_f64()? {
            0.0 => Some(false),
            1.0 => Some(true),
            _ => None,
        },
        Value::String(s) => match s.trim() {
            "0" => Some(false),
            "1" => Some(true),
            s if s.eq_ignore_ascii_case("true") => Some(true),
            s if s.eq_ignore_ascii_case("false") => Some(false),
            _ => None,
        },
        _ => None,
    }
}

/// Reads `{"sufficiency", "gap", "queries"}` from an audit reply.
/// The flag may be 0/1 or a boolean; at most `max_queries` queries are kept.
pub fn parse_verdict(text: &str, strict: bool, max_queries: usize) -> Option<SufficiencyVerdict> {
    let obj = json::parse_object(text, strict)?;
    let sufficient = flag(obj.get("sufficiency")?)?;
    let gap = match obj.get("gap") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.trim().to_string(),
        Some(_) => return None,
    };
    let queries = match obj.get("queries").or_else(|| obj.get("next_queries")) {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()?,
        Some(Value::String(s)) => vec![s.clone()],
        Some(_) => return None,
    };
    Some(SufficiencyVerdict::new(sufficient, gap, queries, max_queries))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditOutcome {
    pub verdict: SufficiencyVerdict,
    /// Every reply was unusable and the stand-in verdict was used.
    pub failed: bool,
}

/// Asks the explorer role whether `evidence` suffices, and for follow-up
/// queries if not. Unparseable replies (after retries) yield an insufficient
/// verdict with no queries, which ends the loop as stagnation.
pub fn audit(
    gateway: &LlmGateway,
    config: &RunConfig,
    schema: &ClinicalSchema,
    queries: &[String],
    evidence: &EvidenceSet,
    meter: &mut Meter,
) -> Result<AuditOutcome, GatewayError> {
    let bindings = HashMap::from([
        ("clinical_schema", bindings::clinical_schema(schema)),
        ("query_list", bindings::query_list(queries)),
        ("summaries", bindings::summaries(evidence.docs(), config.summary_chars)),
    ]);
    let prompt = RolePrompt::explorer()
        .render(&bindings)
        .expect("explorer bindings complete");
    for attempt in 0..=config.max_parse_retries {
        let reply = gateway.call(Role::Explorer, &prompt, meter, attempt > 0)?;
        if let Some(verdict) = parse_verdict(&reply.text, config.strict_json, config.m) {
            return Ok(AuditOutcome { verdict, failed: false });
        }
        debug!(attempt, "unparseable audit reply");
    }
    warn!(question = %meter.question_id, "audit output unusable; ending loop");
    Ok(AuditOutcome {
        verdict: SufficiencyVerdict::new(false, PARSE_FAILURE_GAP, Vec::new(), config.m),
        failed: true,
    })
}

#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub evidence: EvidenceSet,
    pub trajectory: RetrievalTrajectory,
    /// Every query issued, in order.
    pub all_queries: Vec<String>,
}

#[derive(Debug, Error)]
pub enum LoopError {
    #[error("retrieval failed: {0}")]
    Index(#[from] IndexError),
    #[error("model call failed after {} completed round(s): {source}", rounds.len())]
    Gateway {
        #[source]
        source: GatewayError,
        /// Rounds completed before the failure.
        rounds: Vec<RoundRecord>,
        evidence: EvidenceSet,
    },
}

/// Runs the loop from `initial_query`, for at most `config.effective_t_max()`
/// rounds. Each round retrieves for the current queries, merges unseen
/// documents and audits; the loop stops on a sufficient verdict, an empty
/// follow-up set, or the round budget.
// the error carries the partial trajectory on purpose
#[allow(clippy::result_large_err)]
pub fn run_loop(
    gateway: &LlmGateway,
    retriever: Retriever<'_>,
    config: &RunConfig,
    schema: &ClinicalSchema,
    initial_query: &str,
    meter: &mut Meter,
) -> Result<LoopOutcome, LoopError> {
    let t_max = config.effective_t_max();
    let start = meter.counters;
    let watch = Stopwatch::start(config.timing);
    let mut evidence = EvidenceSet::new();
    let mut queries = vec![initial_query.to_string()];
    let mut issued: Vec<String> = Vec::new();
    let mut rounds: Vec<RoundRecord> = Vec::new();

    let termination = loop {
        let t = rounds.len() + 1;
        let candidates = retriever.retrieve_round(&queries, config.k, &mut meter.counters)?;
        let newly_added = evidence.absorb(candidates.into_iter().map(|c| c.doc));
        issued.extend(queries.iter().cloned());

        let shown: &[String] = match config.query_context {
            QueryContext::Cumulative => &issued,
            QueryContext::Current => &queries,
        };
        let outcome = match audit(gateway, config, schema, shown, &evidence, meter) {
            Ok(o) => o,
            Err(source) => {
                return Err(LoopError::Gateway {
                    source,
                    rounds,
                    evidence,
                })
            }
        };
        let next = outcome.verdict.next_queries().to_vec();
        let sufficient = outcome.verdict.is_sufficient();
        debug!(
            round = t,
            added = newly_added.len(),
            size = evidence.len(),
            sufficient,
            "round complete"
        );
        rounds.push(RoundRecord {
            round_index: t,
            queries: std::mem::take(&mut queries),
            newly_added,
            evidence_size: evidence.len(),
            verdict: outcome.verdict,
            audit_failed: outcome.failed,
        });

        if sufficient {
            break Termination::Sufficient;
        }
        if next.is_empty() {
            break Termination::Stagnation;
        }
        if t >= t_max {
            break Termination::MaxRounds;
        }
        queries = next;
    };

    let mut counters = meter.counters.since(&start);
    counters.wall_ms = watch.elapsed_ms();
    let trajectory = RetrievalTrajectory {
        rounds_executed: rounds.len(),
        rounds,
        termination,
        counters,
    };
    Ok(LoopOutcome {
        evidence,
        trajectory,
        all_queries: issued,
    })
}

/// Re-runs the recorded queries of `trajectory` against `retriever` and
/// returns the ids each round would newly add.
pub fn replay_new_ids(
    retriever: Retriever<'_>,
    k: usize,
    trajectory: &RetrievalTrajectory,
) -> Result<Vec<Vec<String>>, IndexError> {
    let mut evidence = EvidenceSet::new();
    let mut scratch = CostCounters::default();
    trajectory
        .rounds
        .iter()
        .map(|r| {
            let c = retriever.retrieve_round(&r.queries, k, &mut scratch)?;
            Ok(evidence.absorb(c.into_iter().map(|c| c.doc)))
        })
        .collect()
}
