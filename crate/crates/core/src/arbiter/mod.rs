//! Evidence adjudication and evidence-grounded answer selection.

mod parse;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracing::warn;

pub use parse::{parse_answer, AnswerParseError};

use crate::bindings;
use crate::domain::{AnswerLabel, Claim, ClinicalSchema, EvidenceReport, EvidenceSet, Question, RunConfig};
use crate::llm::{json, GatewayError, LlmGateway, Meter, Role, RolePrompt};

pub const FALLBACK_SYNTHESIS: &str = "fallback";
const FALLBACK_DOCS: usize = 3;
const FALLBACK_CLAIM_CHARS: usize = 300;

fn normalize_id(raw: &str) -> String {
    raw.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .trim()
        .to_string()
}

fn parse_claims(v: Option<&Value>) -> Option<Vec<Claim>> {
    let items = match v {
        None | Some(Value::Null) => return Some(Vec::new()),
        Some(Value::Array(items)) => items,
        Some(_) => return None,
    };
    items
        .iter()
        .map(|item| {
            let obj = item.as_object()?;
            let claim = obj.get("claim")?.as_str()?.trim().to_string();
            let source_ids = match obj.get("source_ids") {
                None | Some(Value::Null) => Vec::new(),
                Some(Value::Array(ids)) => ids
                    .iter()
                    .map(|id| match id {
                        Value::String(s) => Some(normalize_id(s)),
                        Value::Number(n) => Some(n.to_string()),
                        _ => None,
                    })
                    .collect::<Option<Vec<_>>>()?,
                Some(Value::String(s)) => vec![normalize_id(s)],
                Some(_) => return None,
            };
            Some(Claim { claim, source_ids })
        })
        .collect()
}

/// Reads the adjudicator's JSON report. `question_focus` is required; the
/// claim lists and synthesis default to empty.
pub fn parse_report(text: &str, strict: bool) -> Option<EvidenceReport> {
    let obj = json::parse_object(text, strict)?;
    let question_focus = obj.get("question_focus")?.as_str()?.trim().to_string();
    Some(EvidenceReport {
        question_focus,
        supporting: parse_claims(obj.get("key_supporting_evidence"))?,
        conflicting: parse_claims(obj.get("key_conflicting_or_limiting_evidence"))?,
        synthesis: obj
            .get("evidence_synthesis")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .trim()
            .to_string(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filtered {
    /// Cited ids that are not in the evidence set, in order of appearance.
    pub dropped_ids: Vec<String>,
    /// Claims removed because none of their sources survived.
    pub dropped_claims: usize,
}

/// Removes citations outside `evidence`. A claim keeps its valid sources and
/// is removed when none remain.
pub fn enforce_traceability(report: &mut EvidenceReport, evidence: &EvidenceSet) -> Filtered {
    let mut out = Filtered::default();
    for list in [&mut report.supporting, &mut report.conflicting] {
        list.retain_mut(|claim| {
            claim.source_ids.retain(|id| {
                let known = evidence.contains(id);
                if !known {
                    out.dropped_ids.push(id.clone());
                }
                known
            });
            let keep = !claim.source_ids.is_empty();
            if !keep {
                out.dropped_claims += 1;
            }
            keep
        });
    }
    out
}

/// Report built without the model: one verbatim claim for each of the first
/// few evidence documents.
pub fn fallback_report(question: &Question, evidence: &EvidenceSet) -> EvidenceReport {
    EvidenceReport {
        question_focus: question.stem.trim().to_string(),
        supporting: fallback_claims(evidence),
        conflicting: Vec::new(),
        synthesis: FALLBACK_SYNTHESIS.to_string(),
    }
}

fn fallback_claims(evidence: &EvidenceSet) -> Vec<Claim> {
    evidence
        .docs()
        .iter()
        .take(FALLBACK_DOCS)
        .map(|d| Claim {
            claim: bindings::truncate_chars(&d.text, FALLBACK_CLAIM_CHARS),
            source_ids: vec![d.doc_id.clone()],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjudication {
    pub report: EvidenceReport,
    pub filtered: Filtered,
    /// The model's report was unusable and [`fallback_report`] was substituted.
    pub fallback: bool,
    /// No supporting claim survived filtering; fallback claims were added.
    pub backfilled: bool,
}

/// Organizes the final evidence into a report whose every citation resolves
/// to a document in `evidence`.
pub fn adjudicate(
    gateway: &LlmGateway,
    config: &RunConfig,
    question: &Question,
    schema: &ClinicalSchema,
    queries: &[String],
    evidence: &EvidenceSet,
    meter: &mut Meter,
) -> Result<Adjudication, GatewayError> {
    let bindings = HashMap::from([
        ("research_topic", bindings::research_topic(question)),
        ("clinical_schema", bindings::clinical_schema(schema)),
        ("query_list", bindings::query_list(queries)),
        ("summaries", bindings::summaries(evidence.docs(), config.summary_chars)),
    ]);
    let prompt = RolePrompt::adjudicator()
        .render(&bindings)
        .expect("adjudicator bindings complete");
    for attempt in 0..=config.max_parse_retries {
        let reply = gateway.call(Role::Adjudicator, &prompt, meter, attempt > 0)?;
        let Some(mut report) = parse_report(&reply.text, config.strict_json) else {
            continue;
        };
        let filtered = enforce_traceability(&mut report, evidence);
        if !filtered.dropped_ids.is_empty() {
            warn!(
                question = %question.id,
                dropped = ?filtered.dropped_ids,
                claims_removed = filtered.dropped_claims,
                "report cited unknown sources"
            );
        }
        let backfilled = report.supporting.is_empty() && !evidence.is_empty();
        if backfilled {
            report.supporting = fallback_claims(evidence);
        }
        return Ok(Adjudication {
            report,
            filtered,
            fallback: false,
            backfilled,
        });
    }
    warn!(question = %question.id, "adjudicator output unusable; using fallback report");
    Ok(Adjudication {
        report: fallback_report(question, evidence),
        filtered: Filtered::default(),
        fallback: true,
        backfilled: false,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    /// `None` means the arbiter abstained.
    pub label: Option<AnswerLabel>,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

impl AnswerOutcome {
    pub fn abstained(&self) -> bool {
        self.label.is_none()
    }
}

/// Selects a label given `grounding` (the rendered report, or evidence
/// listings when adjudication is skipped). Unparseable replies after
/// retries abstain.
pub fn answer(
    gateway: &LlmGateway,
    config: &RunConfig,
    question: &Question,
    grounding: &str,
    meter: &mut Meter,
) -> Result<AnswerOutcome, GatewayError> {
    let bindings = HashMap::from([
        ("research_topic", bindings::research_topic(question)),
        ("adjudication_report", grounding.to_string()),
    ]);
    let prompt = RolePrompt::answerer(question.task_kind)
        .render(&bindings)
        .expect("answerer bindings complete");
    let allowed = question.labels();
    let mut last = (String::new(), AnswerParseError::NoLabelFound);
    for attempt in 0..=config.max_parse_retries {
        let reply = gateway.call(Role::Answerer, &prompt, meter, attempt > 0)?;
        match parse_answer(&reply.text, &allowed) {
            Ok(label) => {
                return Ok(AnswerOutcome {
                    label: Some(AnswerLabel::from_canonical(label)),
                    raw: reply.text,
                    parse_error: None,
                })
            }
            Err(e) => last = (reply.text, e),
        }
    }
    warn!(question = %question.id, error = %last.1, "abstaining");
    Ok(AnswerOutcome {
        label: None,
        raw: last.0,
        parse_error: Some(last.1.to_string()),
    })
}
