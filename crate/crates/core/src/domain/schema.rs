use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Structured view of a question: intent, salient entities, qualifying
/// constraints and a short seed query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalSchema {
    pub intent: String,
    pub entities: Vec<String>,
    pub constraints: Vec<String>,
    pub q_init: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("q_init is empty")]
    EmptyQuery,
    #[error("{field} contains an empty entry")]
    EmptyEntry { field: &'static str },
}

impl ClinicalSchema {
    pub fn new(
        intent: impl Into<String>,
        entities: Vec<String>,
        constraints: Vec<String>,
        q_init: impl Into<String>,
    ) -> Result<Self, SchemaError> {
        let schema = ClinicalSchema {
            intent: intent.into(),
            entities,
            constraints,
            q_init: q_init.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.q_init.trim().is_empty() {
            return Err(SchemaError::EmptyQuery);
        }
        if self.entities.iter().any(|e| e.trim().is_empty()) {
            return Err(SchemaError::EmptyEntry { field: "entities" });
        }
        if self.constraints.iter().any(|c| c.trim().is_empty()) {
            return Err(SchemaError::EmptyEntry { field: "constraints" });
        }
        Ok(())
    }

    /// Fallback used when no schema could be obtained: the stem becomes the query.
    pub fn degraded(stem: &str) -> Self {
        ClinicalSchema {
            intent: "unknown".to_string(),
            entities: Vec::new(),
            constraints: Vec::new(),
            q_init: stem.trim().to_string(),
        }
    }
}
