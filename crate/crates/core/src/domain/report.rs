use serde::{Deserialize, Serialize};

use super::evidence::EvidenceSet;
use super::question::Question;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub claim: String,
    #[serde(default)]
    pub source_ids: Vec<String>,
}

/// Adjudicated, source-attributed summary of the final evidence set.
/// Field names follow the JSON keys the adjudicator is asked to emit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceReport {
    pub question_focus: String,
    #[serde(rename = "key_supporting_evidence", default)]
    pub supporting: Vec<Claim>,
    #[serde(rename = "key_conflicting_or_limiting_evidence", default)]
    pub conflicting: Vec<Claim>,
    #[serde(rename = "evidence_synthesis", default)]
    pub synthesis: String,
}

impl EvidenceReport {
    pub fn cited_ids(&self) -> impl Iterator<Item = &str> {
        self.supporting
            .iter()
            .chain(&self.conflicting)
            .flat_map(|c| c.source_ids.iter().map(String::as_str))
    }

    /// True when every cited id belongs to `evidence`.
    pub fn is_closed_over(&self, evidence: &EvidenceSet) -> bool {
        self.cited_ids().all(|id| evidence.contains(id))
    }
}

/// A label drawn from a question's candidate set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerLabel(String);

impl AnswerLabel {
    /// Canonicalizes `raw` against the question's label set.
    pub fn for_question(q: &Question, raw: &str) -> Option<Self> {
        q.task_kind
            .canonical_label(raw)
            .filter(|l| q.options.iter().any(|o| o.label == *l))
            .map(|l| AnswerLabel(l.to_string()))
    }

    pub(crate) fn from_canonical(label: &str) -> Self {
        AnswerLabel(label.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for AnswerLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}
