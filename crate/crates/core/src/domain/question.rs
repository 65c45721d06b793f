use std::collections::HashSet;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Answer format of a question. Each kind has a fixed label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Four-option multiple choice, labels A-D.
    Mcq4,
    /// Yes / no.
    Yn,
    /// Yes / no / maybe.
    Ynm,
}

impl TaskKind {
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            TaskKind::Mcq4 => &["A", "B", "C", "D"],
            TaskKind::Yn => &["yes", "no"],
            TaskKind::Ynm => &["yes", "no", "maybe"],
        }
    }

    /// Maps raw label text onto the canonical form for this kind.
    /// Matching is case-insensitive and ignores surrounding whitespace.
    pub fn canonical_label(self, raw: &str) -> Option<&'static str> {
        let raw = raw.trim();
        self.labels().iter().copied().find(|l| l.eq_ignore_ascii_case(raw))
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Mcq4 => "mcq4",
            TaskKind::Yn => "yn",
            TaskKind::Ynm => "ynm",
        })
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mcq4" | "mcq" => Ok(TaskKind::Mcq4),
            "yn" => Ok(TaskKind::Yn),
            "ynm" => Ok(TaskKind::Ynm),
            other => Err(format!("unknown task kind `{other}` (expected mcq4, yn or ynm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub label: String,
    pub text: String,
}

/// A validated question. Construct through [`validate_question`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub stem: String,
    pub options: Vec<AnswerOption>,
    pub task_kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_key: Option<String>,
}

impl Question {
    pub fn labels(&self) -> Vec<&str> {
        self.options.iter().map(|o| o.label.as_str()).collect()
    }

    /// Stem followed by one `label. text` line per option.
    pub fn render_with_options(&self) -> String {
        let mut out = self.stem.clone();
        for opt in &self.options {
            out.push('\n');
            out.push_str(&opt.label);
            out.push_str(". ");
            out.push_str(&opt.text);
        }
        out
    }
}

/// Question as read from disk, before validation. Options keep their input
/// order and any duplicate keys so that duplicates can be reported.
#[derive(Debug, Clone, Deserialize)]
pub struct RawQuestion {
    pub id: String,
    pub question: String,
    #[serde(deserialize_with = "ordered_entries")]
    pub options: Vec<(String, String)>,
    #[serde(default)]
    pub answer: Option<String>,
}

fn ordered_entries<'de, D>(de: D) -> Result<Vec<(String, String)>, D::Error>
where
    D: Deserializer<'de>,
{
    struct EntriesVisitor;

    impl<'de> Visitor<'de> for EntriesVisitor {
        type Value = Vec<(String, String)>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("an object mapping option labels to option text")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some((k, v)) = map.next_entry::<String, String>()? {
                out.push((k, v));
            }
            Ok(out)
        }
    }

    de.deserialize_map(EntriesVisitor)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuestionError {
    #[error("field `options`: no options given")]
    EmptyOptions,
    #[error("field `options`: duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("field `options`: labels {found:?} do not match the {kind} label set {expected:?}")]
    LabelSetMismatch {
        kind: TaskKind,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("field `answer`: `{0}` is not one of the option labels")]
    AnswerNotInLabelSet(String),
    #[error("field `question`: stem is empty")]
    EmptyStem,
    #[error("field `id`: id is empty")]
    EmptyId,
}

/// Checks a raw record against the label-set rules of `kind` and returns the
/// canonicalized question.
pub fn validate_question(raw: RawQuestion, kind: TaskKind) -> Result<Question, QuestionError> {
    if raw.id.trim().is_empty() {
        return Err(QuestionError::EmptyId);
    }
    if raw.question.trim().is_empty() {
        return Err(QuestionError::EmptyStem);
    }
    if raw.options.is_empty() {
        return Err(QuestionError::EmptyOptions);
    }

    let mismatch = |found: &[(String, String)]| QuestionError::LabelSetMismatch {
        kind,
        expected: kind.labels().iter().map(|s| s.to_string()).collect(),
        found: found.iter().map(|(k, _)| k.clone()).collect(),
    };

    let mut seen = HashSet::new();
    let mut options = Vec::with_capacity(raw.options.len());
    for (label, text) in &raw.options {
        let canonical = match kind.canonical_label(label) {
            Some(c) => c,
            None => {
                // an unknown label could still be a literal duplicate; report that first
                if !seen.insert(label.trim().to_string()) {
                    return Err(QuestionError::DuplicateLabel(label.clone()));
                }
                return Err(mismatch(&raw.options));
            }
        };
        if !seen.insert(canonical.to_string()) {
            return Err(QuestionError::DuplicateLabel(label.clone()));
        }
        options.push(AnswerOption {
            label: canonical.to_string(),
            text: text.clone(),
        });
    }
    if options.len() != kind.labels().len() {
        return Err(mismatch(&raw.options));
    }

    let answer_key = match raw.answer {
        None => None,
        Some(a) => match kind.canonical_label(&a) {
            Some(c) => Some(c.to_string()),
            None => return Err(QuestionError::AnswerNotInLabelSet(a)),
        },
    };

    Ok(Question {
        id: raw.id,
        stem: raw.question,
        options,
        task_kind: kind,
        answer_key,
    })
}
