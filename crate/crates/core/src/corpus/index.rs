use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::embed::{EmbedError, Embedder};
use crate::domain::EvidenceDoc;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DOCS_FILE: &str = "docs.jsonl";
pub const VECTORS_FILE: &str = "vectors.f64le";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("vector for `{doc_id}` has dimension {got}, index expects {expected}")]
    DimensionMismatch {
        doc_id: String,
        expected: usize,
        got: usize,
    },
    #[error("duplicate doc_id `{0}`")]
    DuplicateDocId(String),
    #[error("non-finite value in vector for `{0}`")]
    NonFinite(String),
    #[error("embedder `{embedder}` does not match index embedder `{index}`")]
    EmbedderMismatch { embedder: String, index: String },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IndexError + '_ {
    move |source| IndexError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Sidecar summary written next to a persisted index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub embedder_tag: String,
    pub dimension: usize,
    pub doc_count: usize,
    pub content_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Row in the index.
    pub row: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc: EvidenceDoc,
    pub score: f64,
}

/// Exact inner-product index over a fixed set of documents.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    dimension: usize,
    embedder_tag: String,
    docs: Vec<EvidenceDoc>,
    /// Row-major, `docs.len() * dimension`.
    matrix: Vec<f64>,
    /// Position of each row when rows are sorted by doc_id; used for tie-breaks.
    id_rank: Vec<u32>,
}

/// Heap entry ordered so that the *worse* result compares greater.
#[derive(Clone, Copy)]
struct Ranked {
    score: f64,
    id_rank: u32,
    row: usize,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.id_rank.cmp(&other.id_rank))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl VectorIndex {
    /// Builds an index from documents and their vectors. Rows keep the given order.
    pub fn build(
        dimension: usize,
        embedder_tag: impl Into<String>,
        entries: Vec<(EvidenceDoc, Vec<f64>)>,
    ) -> Result<Self, IndexError> {
        let mut seen = HashSet::with_capacity(entries.len());
        let mut docs = Vec::with_capacity(entries.len());
        let mut matrix = Vec::with_capacity(entries.len() * dimension);
        for (mut doc, vector) in entries {
            if vector.len() != dimension {
                return Err(IndexError::DimensionMismatch {
                    doc_id: doc.doc_id,
                    expected: dimension,
                    got: vector.len(),
                });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(IndexError::NonFinite(doc.doc_id));
            }
            if !seen.insert(doc.doc_id.clone()) {
                return Err(IndexError::DuplicateDocId(doc.doc_id));
            }
            doc.embedding = None;
            docs.push(doc);
            matrix.extend_from_slice(&vector);
        }
        let mut order: Vec<usize> = (0..docs.len()).collect();
        order.sort_by(|&a, &b| docs[a].doc_id.cmp(&docs[b].doc_id));
        let mut id_rank = vec![0u32; docs.len()];
        for (rank, row) in order.into_iter().enumerate() {
            id_rank[row] = rank as u32;
        }
        Ok(VectorIndex {
            dimension,
            embedder_tag: embedder_tag.into(),
            docs,
            matrix,
            id_rank,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn embedder_tag(&self) -> &str {
        &self.embedder_tag
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[EvidenceDoc] {
        &self.docs
    }

    pub fn doc(&self, row: usize) -> &EvidenceDoc {
        &self.docs[row]
    }

    pub fn vector(&self, row: usize) -> &[f64] {
        &self.matrix[row * self.dimension..(row + 1) * self.dimension]
    }

    /// The `min(k, len)` rows with the largest inner product against `query`,
    /// best first; equal scores are ordered by ascending doc_id.
    pub fn search_vector(&self, query: &[f64], k: usize) -> Result<Vec<Hit>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if self.docs.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        if query.len() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                doc_id: "<query>".into(),
                expected: self.dimension,
                got: query.len(),
            });
        }
        if query.iter().any(|x| !x.is_finite()) {
            return Err(IndexError::NonFinite("<query>".into()));
        }
        let k = k.min(self.docs.len());
        let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
        for (row, vector) in self.matrix.chunks_exact(self.dimension).enumerate() {
            let cand = Ranked {
                // + 0.0 folds -0.0 into 0.0 so the two tie by doc_id
                score: dot(query, vector) + 0.0,
                id_rank: self.id_rank[row],
                row,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if let Some(worst) = heap.peek() {
                if cand < *worst {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|r| Hit {
                row: r.row,
                score: r.score,
            })
            .collect())
    }

    /// Embeds `query` on the query side and returns its top-k documents.
    pub fn topk(&self, embedder: &dyn Embedder, query: &str, k: usize) -> Result<Vec<ScoredDoc>, IndexError> {
        if embedder.tag() != self.embedder_tag {
            return Err(IndexError::EmbedderMismatch {
                embedder: embedder.tag(),
                index: self.embedder_tag.clone(),
            });
        }
        if self.docs.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        let q = embedder.embed_query(query)?;
        Ok(self
            .search_vector(&q, k)?
            .into_iter()
            .map(|h| ScoredDoc {
                doc: self.docs[h.row].clone(),
                score: h.score,
            })
            .collect())
    }

    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.embedder_tag.as_bytes());
        h.update((self.dimension as u64).to_le_bytes());
        for (row, doc) in self.docs.iter().enumerate() {
            for field in [&doc.doc_id, &doc.source_corpus, &doc.title, &doc.text] {
                h.update((field.len() as u64).to_le_bytes());
                h.update(field.as_bytes());
            }
            for x in self.vector(row) {
                h.update(x.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn manifest(&self) -> IndexManifest {
        IndexManifest {
            embedder_tag: self.embedder_tag.clone(),
            dimension: self.dimension,
            doc_count: self.docs.len(),
            content_hash: self.content_hash(),
        }
    }

    /// Writes manifest, documents and raw little-endian vectors into `dir`.
    pub fn save(&self, dir: &Path) -> Result<IndexManifest, IndexError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let docs_path = dir.join(DOCS_FILE);
        let mut w = BufWriter::new(fs::File::create(&docs_path).map_err(io_err(&docs_path))?);
        for doc in &self.docs {
            serde_json::to_writer(&mut w, doc).map_err(|e| IndexError::Corrupt {
                path: docs_path.clone(),
                reason: e.to_string(),
            })?;
            w.write_all(b"\n").map_err(io_err(&docs_path))?;
        }
        w.flush().map_err(io_err(&docs_path))?;

        let vec_path = dir.join(VECTORS_FILE);
        let bytes: Vec<u8> = self.matrix.iter().flat_map(|x| x.to_le_bytes()).collect();
        fs::write(&vec_path, bytes).map_err(io_err(&vec_path))?;

        let manifest = self.manifest();
        let man_path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&man_path, text + "\n").map_err(io_err(&man_path))?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let man_path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&man_path).map_err(io_err(&man_path))?;
        let manifest: IndexManifest = serde_json::from_str(&text).map_err(|e| IndexError::Corrupt {
            path: man_path.clone(),
            reason: e.to_string(),
        })?;

        let docs_path = dir.join(DOCS_FILE);
        let file = fs::File::open(&docs_path).map_err(io_err(&docs_path))?;
        let mut docs = Vec::with_capacity(manifest.doc_count);
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(&docs_path))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: EvidenceDoc = serde_json::from_str(&line).map_err(|e| IndexError::Corrupt {
                path: docs_path.clone(),
                reason: format!("line {}: {e}", i + 1),
            })?;
            docs.push(doc);
        }

        let vec_path = dir.join(VECTORS_FILE);
        let bytes = fs::read(&vec_path).map_err(io_err(&vec_path))?;
        let dim = manifest.dimension;
        if docs.len() != manifest.doc_count || bytes.len() != docs.len() * dim * 8 {
            return Err(IndexError::Corrupt {
                path: dir.to_path_buf(),
                reason: format!(
                    "manifest declares {} docs of dimension {dim}, found {} docs and {} vector bytes",
                    manifest.doc_count,
                    docs.len(),
                    bytes.len()
                ),
            });
        }
        let matrix: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        let entries = docs
            .into_iter()
            .zip(
                matrix
                    .chunks_exact(dim.max(1))
                    .map(<[f64]>::to_vec)
                    .chain(std::iter::repeat(Vec::new())),
            )
            .collect();
        let index = VectorIndex::build(dim, manifest.embedder_tag.clone(), entries)?;
        if index.content_hash() != manifest.content_hash {
            return Err(IndexError::Corrupt {
                path: man_path,
                reason: "content hash does not match stored documents".into(),
            });
        }
        Ok(index)
    }
}
