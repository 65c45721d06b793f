//! Types shared by every pipeline stage.

mod config;
mod evidence;
mod question;
mod report;
mod schema;
mod trajectory;
mod verdict;

pub use config::{
    Ablation, BackendConfig, Budget, CacheConfig, ConfigError, EmbedderConfig, QueryContext, RetryPolicy, RunConfig,
    Timing,
};
pub use evidence::{derive_doc_id, DuplicateDocId, EvidenceDoc, EvidenceSet, DOC_ID_HEX_LEN};
pub use question::{validate_question, AnswerOption, Question, QuestionError, RawQuestion, TaskKind};
pub use report::{AnswerLabel, Claim, EvidenceReport};
pub use schema::{ClinicalSchema, SchemaError};
pub use trajectory::{CostCounters, RetrievalTrajectory, RoundRecord, Termination, TrajectoryError};
pub use verdict::{SufficiencyVerdict, VerdictError, NOT_APPLICABLE_GAP};
