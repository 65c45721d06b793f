//! Question interpretation: question -> clinical schema -> first retrieval query.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tracing::warn;

use crate::bindings;
use crate::domain::{ClinicalSchema, Question, RunConfig};
use crate::llm::{json, GatewayError, LlmGateway, Meter, Role, RolePrompt};

pub const FIELD_SEPARATOR: &str = "; ";
pub const ITEM_SEPARATOR: &str = ", ";

/// Flattens a schema into one retriever query: q_init, intent, entities and
/// constraints joined by `"; "`, list items joined by `", "`. Empty fields are
/// left out together with their separator.
pub fn linearize(s: &ClinicalSchema) -> String {
    let mut fields: Vec<String> = vec![s.q_init.clone()];
    if !s.intent.trim().is_empty() {
        fields.push(s.intent.clone());
    }
    for list in [&s.entities, &s.constraints] {
        if !list.is_empty() {
            fields.push(list.join(ITEM_SEPARATOR));
        }
    }
    fields.join(FIELD_SEPARATOR)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("no valid schema after {attempts} attempt(s)")]
pub struct SchemaParseFailure {
    pub attempts: u32,
    /// Last raw reply, kept for audit.
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interpretation {
    pub schema: ClinicalSchema,
    /// True when the fallback schema was substituted.
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<SchemaParseFailure>,
}

fn string_list(v: Option<&Value>) -> Option<Vec<String>> {
    match v {
        None | Some(Value::Null) => Some(Vec::new()),
        Some(Value::String(s)) => Some(
            Some(s.trim().to_string())
                .filter(|s| !s.is_empty())
                .into_iter()
                .collect(),
        ),
        Some(Value::Array(items)) => items
            .iter()
            .map(|i| i.as_str().map(|s| s.trim().to_string()))
            .filter(|s| s.as_deref() != Some(""))
            .collect(),
        Some(_) => None,
    }
}

/// Extracts a schema from a model reply. Blank list entries are dropped; a
/// missing or blank `q_init` makes the reply unusable.
pub fn parse_schema(text: &str, strict: bool) -> Option<ClinicalSchema> {
    let obj = json::parse_object(text, strict)?;
    let intent = match obj.get("intent") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.trim().to_string(),
        Some(_) => return None,
    };
    let entities = string_list(obj.get("entities"))?;
    let constraints = string_list(obj.get("constraints"))?;
    let q_init = obj.get("q_init")?.as_str()?.trim().to_string();
    ClinicalSchema::new(intent, entities, constraints, q_init).ok()
}

/// Asks the interpreter role for a schema, re-asking up to
/// `max_parse_retries` times. When every reply is unusable the degraded
/// schema (stem as query) is returned and flagged.
pub fn interpret(
    gateway: &LlmGateway,
    config: &RunConfig,
    question: &Question,
    meter: &mut Meter,
) -> Result<Interpretation, GatewayError> {
    let bindings = HashMap::from([("research_topic", bindings::research_topic(question))]);
    let prompt = RolePrompt::interpreter()
        .render(&bindings)
        .expect("interpreter bindings complete");
    let attempts = 1 + config.max_parse_retries;
    let mut last_raw = String::new();
    for attempt in 0..attempts {
        let reply = gateway.call(Role::Interpreter, &prompt, meter, attempt > 0)?;
        if let Some(schema) = parse_schema(&reply.text, config.strict_json) {
            return Ok(Interpretation {
                schema,
                degraded: false,
                failure: None,
            });
        }
        last_raw = reply.text;
    }
    warn!(question = %question.id, "interpreter output unusable; using degraded schema");
    Ok(Interpretation {
        schema: ClinicalSchema::degraded(&question.stem),
        degraded: true,
        failure: Some(SchemaParseFailure {
            attempts,
            raw: last_raw,
        }),
    })
}
