use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{validate_question, Question, RawQuestion, TaskKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub questions: Vec<Question>,
    pub rejected: Vec<LineError>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset contains no valid questions ({} line(s) rejected)", rejected.len())]
    Empty { rejected: Vec<LineError> },
}

/// Parses JSONL records `{"id","question","options":{label:text},"answer"}`.
/// Invalid lines are collected with their line numbers; the rest load.
pub fn parse_dataset(text: &str, kind: TaskKind) -> Result<LoadedDataset, DatasetError> {
    let mut questions = Vec::new();
    let mut rejected = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let reject = |message: String| LineError { line: i + 1, message };
        let raw: RawQuestion = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                rejected.push(reject(e.to_string()));
                continue;
            }
        };
        match validate_question(raw, kind) {
            Ok(q) if !ids.insert(q.id.clone()) => rejected.push(reject(format!("duplicate question id `{}`", q.id))),
            Ok(q) => questions.push(q),
            Err(e) => rejected.push(reject(e.to_string())),
        }
    }
    if questions.is_empty() {
        return Err(DatasetError::Empty { rejected });
    }
    Ok(LoadedDataset { questions, rejected })
}

pub fn load_dataset(path: &Path, kind: TaskKind) -> Result<LoadedDataset, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MCQ: &str = r#"{"id":"1","question":"a?","options":{"A":"w","B":"x","C":"y","D":"z"},"answer":"A"}
{"id":"2","question":"b?","options":{"A":"w","B":"x","C":"y","D":"z"},"answer":"B"}
{"id":"3","question":"c?","options":{"A":"w","B":"x","C":"y","D":"z"},"answer":"C"}
"#;

    #[test]
    fn well_formed_mcq() {
        let d = parse_dataset(MCQ, TaskKind::Mcq4).unwrap();
        assert_eq!(d.questions.len(), 3);
        assert!(d.rejected.is_empty());
    }

    #[test]
    fn ynm_labels() {
        let t = r#"{"id":"p1","question":"Does x cause y?","options":{"yes":"","no":"","maybe":""},"answer":"maybe"}"#;
        let d = parse_dataset(t, TaskKind::Ynm).unwrap();
        assert_eq!(d.questions[0].labels(), vec!["yes", "no", "maybe"]);
    }

    #[test]
    fn missing_options_rejected_others_load() {
        let t = r#"{"id":"1","question":"a?","options":{"A":"w","B":"x","C":"y","D":"z"}}
{"id":"2","question":"b?"}
{"id":"3","question":"c?","options":{"A":"w","B":"x","C":"y","D":"z"}}"#;
        let d = parse_dataset(t, TaskKind::Mcq4).unwrap();
        assert_eq!(d.questions.len(), 2);
        assert_eq!(d.rejected.len(), 1);
        assert_eq!(d.rejected[0].line, 2);
        assert!(d.rejected[0].message.contains("options"));
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(
            parse_dataset("\n", TaskKind::Yn),
            Err(DatasetError::Empty { .. })
        ));
        assert!(
            matches!(parse_dataset("garbage", TaskKind::Yn), Err(DatasetError::Empty { rejected }) if rejected.len() == 1)
        );
    }

    #[test]
    fn duplicate_ids_rejected() {
        let t = format!("{}\n{}", MCQ.lines().next().unwrap(), MCQ.lines().next().unwrap());
        let d = parse_dataset(&t, TaskKind::Mcq4).unwrap();
        assert_eq!(d.questions.len(), 1);
        assert_eq!(d.rejected[0].line, 2);
    }
}
