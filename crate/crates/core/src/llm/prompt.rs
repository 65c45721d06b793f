use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::TaskKind;

/// The four role prompts run against the shared model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Interpreter,
    Explorer,
    Adjudicator,
    Answerer,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Interpreter, Role::Explorer, Role::Adjudicator, Role::Answerer];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Interpreter => "interpreter",
            Role::Explorer => "explorer",
            Role::Adjudicator => "adjudicator",
            Role::Answerer => "answerer",
        }
    }

    /// Adjudicator and answerer are the two phases of the arbiter.
    pub fn is_arbiter(self) -> bool {
        matches!(self, Role::Adjudicator | Role::Answerer)
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const INTERPRETER_TEMPLATE: &str = include_str!("templates/interpreter.txt");
pub const EXPLORER_TEMPLATE: &str = include_str!("templates/explorer.txt");
pub const ADJUDICATOR_TEMPLATE: &str = include_str!("templates/adjudicator.txt");
pub const ANSWERER_MCQ_TEMPLATE: &str = include_str!("templates/answerer_mcq.txt");
pub const ANSWERER_YN_TEMPLATE: &str = include_str!("templates/answerer_yn.txt");
pub const ANSWERER_YNM_TEMPLATE: &str = include_str!("templates/answerer_ynm.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolePrompt {
    pub role: Role,
    pub template: &'static str,
}

impl RolePrompt {
    pub fn interpreter() -> Self {
        RolePrompt {
            role: Role::Interpreter,
            template: INTERPRETER_TEMPLATE,
        }
    }

    pub fn explorer() -> Self {
        RolePrompt {
            role: Role::Explorer,
            template: EXPLORER_TEMPLATE,
        }
    }

    pub fn adjudicator() -> Self {
        RolePrompt {
            role: Role::Adjudicator,
            template: ADJUDICATOR_TEMPLATE,
        }
    }

    /// The printed answer prompt is multiple-choice only; the yes/no and
    /// yes/no/maybe variants differ in the label list and output format line.
    pub fn answerer(kind: TaskKind) -> Self {
        let template = match kind {
            TaskKind::Mcq4 => ANSWERER_MCQ_TEMPLATE,
            TaskKind::Yn => ANSWERER_YN_TEMPLATE,
            TaskKind::Ynm => ANSWERER_YNM_TEMPLATE,
        };
        RolePrompt {
            role: Role::Answerer,
            template,
        }
    }

    pub fn render(&self, bindings: &HashMap<&str, String>) -> Result<String, RenderError> {
        render(self.template, bindings)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("placeholder {{{0}}} has no binding")]
    UnboundPlaceholder(String),
}

fn placeholder_at(template: &str, start: usize) -> Option<&str> {
    let rest = &template[start + 1..];
    let end = rest.find('}')?;
    let name = &rest[..end];
    let valid = !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
        && name.as_bytes()[0].is_ascii_lowercase();
    valid.then_some(name)
}

/// Names of the `{placeholder}` slots in `template`, in order of appearance.
pub fn placeholders(template: &str) -> Vec<&str> {
    template
        .match_indices('{')
        .filter_map(|(i, _)| placeholder_at(template, i))
        .collect()
}

/// Single-pass substitution of `{name}` slots. Braces that do not enclose a
/// lowercase identifier (such as JSON examples) are copied through, and bound
/// values are never rescanned.
pub fn render(template: &str, bindings: &HashMap<&str, String>) -> Result<String, RenderError> {
    let mut out = String::with_capacity(template.len());
    let mut cursor = 0;
    for (i, _) in template.match_indices('{') {
        if i < cursor {
            continue;
        }
        let Some(name) = placeholder_at(template, i) else {
            continue;
        };
        let value = bindings
            .get(name)
            .ok_or_else(|| RenderError::UnboundPlaceholder(name.to_string()))?;
        out.push_str(&template[cursor..i]);
        out.push_str(value);
        cursor = i + name.len() + 2;
    }
    out.push_str(&template[cursor..]);
    Ok(out)
}
