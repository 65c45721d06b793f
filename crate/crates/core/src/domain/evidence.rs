use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Number of hex characters in a document id.
pub const DOC_ID_HEX_LEN: usize = 16;

/// Deterministic document id: truncated SHA-256 over the length-prefixed
/// source, title and text.
pub fn derive_doc_id(source_corpus: &str, title: &str, text: &str) -> String {
    let mut hasher = Sha256::new();
    for field in [source_corpus, title, text] {
        hasher.update((field.len() as u64).to_le_bytes());
        hasher.update(field.as_bytes());
    }
    let digest = hasher.finalize();
    hex::encode(&digest[..DOC_ID_HEX_LEN / 2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceDoc {
    pub doc_id: String,
    pub source_corpus: String,
    pub title: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl EvidenceDoc {
    pub fn new(source_corpus: impl Into<String>, title: impl Into<String>, text: impl Into<String>) -> Self {
        let (source_corpus, title, text) = (source_corpus.into(), title.into(), text.into());
        EvidenceDoc {
            doc_id: derive_doc_id(&source_corpus, &title, &text),
            source_corpus,
            title,
            text,
            embedding: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("duplicate doc_id `{0}` in evidence set")]
pub struct DuplicateDocId(pub String);

/// Accumulated evidence: documents in first-seen order, unique by `doc_id`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EvidenceDoc>", into = "Vec<EvidenceDoc>")]
pub struct EvidenceSet {
    docs: Vec<EvidenceDoc>,
    id_set: HashSet<String>,
}

impl EvidenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn docs(&self) -> &[EvidenceDoc] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.id_set.contains(doc_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.docs.iter().map(|d| d.doc_id.as_str())
    }

    /// Appends every document whose id is not yet present, in the given order.
    /// Returns the ids that were added.
    pub fn absorb<I>(&mut self, docs: I) -> Vec<String>
    where
        I: IntoIterator<Item = EvidenceDoc>,
    {
        let mut added = Vec::new();
        for doc in docs {
            if self.id_set.insert(doc.doc_id.clone()) {
                added.push(doc.doc_id.clone());
                self.docs.push(doc);
            }
        }
        added
    }

    /// Non-mutating union: `self` followed by the unseen documents of `docs`.
    pub fn merge<'a, I>(&self, docs: I) -> EvidenceSet
    where
        I: IntoIterator<Item = &'a EvidenceDoc>,
    {
        let mut out = self.clone();
        out.absorb(docs.into_iter().cloned());
        out
    }
}

impl TryFrom<Vec<EvidenceDoc>> for EvidenceSet {
    type Error = DuplicateDocId;

    fn try_from(docs: Vec<EvidenceDoc>) -> Result<Self, Self::Error> {
        let mut id_set = HashSet::with_capacity(docs.len());
        for d in &docs {
            if !id_set.insert(d.doc_id.clone()) {
                return Err(DuplicateDocId(d.doc_id.clone()));
            }
        }
        Ok(EvidenceSet { docs, id_set })
    }
}

impl From<EvidenceSet> for Vec<EvidenceDoc> {
    fn from(set: EvidenceSet) -> Self {
        set.docs
    }
}
