use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::metrics::RunMetrics;
use super::pipeline::QuestionRecord;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";
pub const REPORTS_FILE: &str = "reports.jsonl";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_TXT: &str = "summary.txt";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), PersistError> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, &item).expect("record serializes");
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(io(path))
}

#[derive(Serialize)]
struct TrajectoryLine<'a> {
    id: &'a str,
    trajectory: &'a Option<crate::domain::RetrievalTrajectory>,
}

#[derive(Serialize)]
struct ReportLine<'a> {
    id: &'a str,
    report: &'a Option<crate::domain::EvidenceReport>,
    fallback: bool,
    dropped_source_ids: &'a [String],
}

/// Writes per-question records, trajectory and report streams, and the
/// summary (JSON and text) into `dir`.
pub fn write_run(
    dir: &Path,
    records: &[QuestionRecord],
    metrics: &RunMetrics,
    label: &str,
) -> Result<(), PersistError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    write_jsonl(&dir.join(RECORDS_FILE), records)?;
    write_jsonl(
        &dir.join(TRAJECTORIES_FILE),
        records.iter().map(|r| TrajectoryLine {
            id: &r.id,
            trajectory: &r.trajectory,
        }),
    )?;
    write_jsonl(
        &dir.join(REPORTS_FILE),
        records.iter().map(|r| ReportLine {
            id: &r.id,
            report: &r.report,
            fallback: r.report_fallback,
            dropped_source_ids: &r.dropped_source_ids,
        }),
    )?;
    write_summary(dir, metrics, label)
}

pub fn write_summary(dir: &Path, metrics: &RunMetrics, label: &str) -> Result<(), PersistError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let json_path = dir.join(SUMMARY_JSON);
    let mut text = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    text.push('\n');
    fs::write(&json_path, text).map_err(io(&json_path))?;
    let txt_path = dir.join(SUMMARY_TXT);
    let mut f = fs::File::create(&txt_path).map_err(io(&txt_path))?;
    f.write_all(metrics.to_table(label).as_bytes()).map_err(io(&txt_path))
}

pub fn read_records(path: &Path) -> Result<Vec<QuestionRecord>, PersistError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PersistError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_summary(path: &Path) -> Result<RunMetrics, PersistError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| PersistError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}
