//! Dataset loading, batch evaluation, metrics and run persistence.

mod dataset;
mod metrics;
mod persist;
mod pipeline;

pub use dataset::{load_dataset, parse_dataset, DatasetError, LineError, LoadedDataset};
pub use metrics::RunMetrics;
pub use persist::{
    read_records, read_summary, write_run, write_summary, PersistError, RECORDS_FILE, REPORTS_FILE, SUMMARY_JSON,
    SUMMARY_TXT, TRAJECTORIES_FILE,
};
pub use pipeline::{run_benchmark, BenchmarkRun, Engine, QuestionFailure, QuestionRecord, Stage};
