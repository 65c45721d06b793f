use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NOT_APPLICABLE_GAP: &str = "N/A";

/// Outcome of one evidence audit.
///
/// A sufficient verdict always carries gap `"N/A"` and no follow-up queries;
/// [`SufficiencyVerdict::new`] normalizes towards that and deserialization
/// rejects anything else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VerdictRepr", into = "VerdictRepr")]
pub struct SufficiencyVerdict {
    sufficient: bool,
    gap: String,
    next_queries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerdictError {
    #[error("sufficient verdict must not carry follow-up queries")]
    QueriesWhenSufficient,
    #[error("sufficient verdict must have gap \"N/A\", got {0:?}")]
    GapWhenSufficient(String),
    #[error("follow-up query is empty")]
    EmptyQuery,
    #[error("sufficiency must be 0 or 1, got {0}")]
    BadFlag(u8),
}

impl SufficiencyVerdict {
    /// Builds a verdict, dropping blank queries and keeping at most `max_queries`.
    /// A sufficient verdict discards any queries and gap text it was given.
    pub fn new(sufficient: bool, gap: impl Into<String>, queries: Vec<String>, max_queries: usize) -> Self {
        if sufficient {
            return Self::sufficient();
        }
        let next_queries = queries
            .into_iter()
            .map(|q| q.trim().to_string())
            .filter(|q| !q.is_empty())
            .take(max_queries)
            .collect();
        SufficiencyVerdict {
            sufficient: false,
            gap: gap.into(),
            next_queries,
        }
    }

    pub fn sufficient() -> Self {
        SufficiencyVerdict {
            sufficient: true,
            gap: NOT_APPLICABLE_GAP.to_string(),
            next_queries: Vec::new(),
        }
    }

    pub fn is_sufficient(&self) -> bool {
        self.sufficient
    }

    pub fn gap(&self) -> &str {
        &self.gap
    }

    pub fn next_queries(&self) -> &[String] {
        &self.next_queries
    }
}

#[derive(Serialize, Deserialize)]
struct VerdictRepr {
    sufficiency: u8,
    gap: String,
    next_queries: Vec<String>,
}

impl TryFrom<VerdictRepr> for SufficiencyVerdict {
    type Error = VerdictError;

    fn try_from(r: VerdictRepr) -> Result<Self, Self::Error> {
        let sufficient = match r.sufficiency {
            0 => false,
            1 => true,
            other => return Err(VerdictError::BadFlag(other)),
        };
        if sufficient {
            if !r.next_queries.is_empty() {
                return Err(VerdictError::QueriesWhenSufficient);
            }
            if r.gap != NOT_APPLICABLE_GAP {
                return Err(VerdictError::GapWhenSufficient(r.gap));
            }
        }
        if r.next_queries.iter().any(|q| q.trim().is_empty()) {
            return Err(VerdictError::EmptyQuery);
        }
        Ok(SufficiencyVerdict {
            sufficient,
            gap: r.gap,
            next_queries: r.next_queries,
        })
    }
}

impl From<SufficiencyVerdict> for VerdictRepr {
    fn from(v: SufficiencyVerdict) -> Self {
        VerdictRepr {
            sufficiency: u8::from(v.sufficient),
            gap: v.gap,
            next_queries: v.next_queries,
        }
    }
}
