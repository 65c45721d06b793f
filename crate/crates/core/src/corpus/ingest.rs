use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info};

use super::chunk::{chunk_text, ChunkingConfig};
use super::embed::{EmbedError, Embedder};
use super::index::{IndexError, VectorIndex};

/// One line of a corpus JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    #[serde(default)]
    pub id: Option<String>,
    pub source: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}:{line}: malformed corpus record: {reason}")]
    MalformedCorpusRecord { path: PathBuf, line: usize, reason: String },
    #[error("embedder produced a {got}-dimensional vector, declared {expected}")]
    EmbedderDimensionMismatch { expected: usize, got: usize },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>, IngestError> {
    let io = |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(fs::File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line).map_err(|e| IngestError::MalformedCorpusRecord {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

const EMBED_BATCH: usize = 64;

/// Chunks, embeds and indexes records. Chunks whose doc_id was already seen
/// (identical source, title and text) are indexed once.
pub fn ingest_records(
    records: &[CorpusRecord],
    chunking: ChunkingConfig,
    embedder: &dyn Embedder,
) -> Result<VectorIndex, IngestError> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for rec in records {
        for chunk in chunk_text(rec.id.as_deref(), &rec.source, &rec.title, &rec.text, chunking) {
            if seen.insert(chunk.doc.doc_id.clone()) {
                docs.push(chunk.doc);
            } else {
                debug!(doc_id = %chunk.doc.doc_id, "skipping duplicate chunk");
            }
        }
    }

    let dim = embedder.dimension();
    let mut entries = Vec::with_capacity(docs.len());
    for batch in docs.chunks(EMBED_BATCH) {
        let texts: Vec<&str> = batch.iter().map(|d| d.text.as_str()).collect();
        let vectors = embedder.embed_docs(&texts)?;
        if vectors.len() != batch.len() {
            return Err(EmbedError::CountMismatch {
                expected: batch.len(),
                got: vectors.len(),
            }
            .into());
        }
        for (doc, v) in batch.iter().zip(vectors) {
            if v.len() != dim {
                return Err(IngestError::EmbedderDimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            entries.push((doc.clone(), v));
        }
    }
    let index = VectorIndex::build(dim, embedder.tag(), entries)?;
    info!(chunks = index.len(), records = records.len(), "index built");
    Ok(index)
}

/// Reads every corpus file in order and builds a single index over all of them.
pub fn ingest(
    paths: &[PathBuf],
    chunking: ChunkingConfig,
    embedder: &dyn Embedder,
) -> Result<VectorIndex, IngestError> {
    let mut records = Vec::new();
    for p in paths {
        records.extend(read_corpus(p)?);
    }
    ingest_records(&records, chunking, embedder)
}
