use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbedError {
    #[error("embedder returned a {got}-dimensional vector, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedder returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedder request failed: {0}")]
    Remote(String),
}

/// Query / document encoder pair mapping text into one vector space.
pub trait Embedder: Send + Sync {
    /// Identity recorded in index manifests.
    fn tag(&self) -> String;

    fn dimension(&self) -> usize;

    fn embed_query(&self, text: &str) -> Result<Vec<f64>, EmbedError>;

    fn embed_docs(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError>;

    fn embed_doc(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut v = self.embed_docs(&[text])?;
        v.pop().ok_or(EmbedError::CountMismatch { expected: 1, got: 0 })
    }
}

/// Deterministic hashing embedder over character trigrams.
///
/// Each trigram of the lowercased, space-padded text is hashed (FNV-1a,
/// seeded) to a bucket and a sign; the bucket counts are L2-normalized.
/// Texts sharing many trigrams end up close in cosine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockEmbedder {
    dim: usize,
    seed: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl MockEmbedder {
    pub const NGRAM: usize = 3;

    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        MockEmbedder { dim, seed }
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        let padded: Vec<char> = std::iter::once(' ')
            .chain(text.to_lowercase().chars())
            .chain(std::iter::once(' '))
            .collect();
        let mut v = vec![0.0f64; self.dim];
        let mut buf = String::new();
        let mut add = |gram: &[char], v: &mut Vec<f64>| {
            buf.clear();
            buf.extend(gram);
            let h = fnv1a(self.seed, buf.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        };
        if padded.len() < Self::NGRAM {
            add(&padded, &mut v);
        } else {
            for gram in padded.windows(Self::NGRAM) {
                add(gram, &mut v);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // every bucket cancelled out; fall back to a single hashed axis
            let h = fnv1a(self.seed, text.as_bytes());
            v[(h % self.dim as u64) as usize] = 1.0;
            return v;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}

impl Embedder for MockEmbedder {
    fn tag(&self) -> String {
        format!("mock-ngram{}-d{}-s{}", Self::NGRAM, self.dim, self.seed)
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_query(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        Ok(self.embed(text))
    }

    fn embed_docs(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed(t)).collect())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
    side: &'static str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Embedding service reached over HTTP: `POST {texts, side}` returning `{vectors}`.
pub struct RemoteEmbedder {
    client: Client,
    url: String,
    dim: usize,
    batch_size: usize,
}

impl RemoteEmbedder {
    pub fn new(url: impl Into<String>, dim: usize, batch_size: usize) -> Result<Self, EmbedError> {
        let client = Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| EmbedError::Remote(e.to_string()))?;
        Ok(RemoteEmbedder {
            client,
            url: url.into(),
            dim,
            batch_size: batch_size.max(1),
        })
    }

    fn request(&self, texts: &[&str], side: &'static str) -> Result<Vec<Vec<f64>>, EmbedError> {
        let resp = self
            .client
            .post(&self.url)
            .json(&EmbedRequest { texts, side })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| EmbedError::Remote(e.to_string()))?;
        let body: EmbedResponse = resp.json().map_err(|e| EmbedError::Remote(e.to_string()))?;
        if body.vectors.len() != texts.len() {
            return Err(EmbedError::CountMismatch {
                expected: texts.len(),
                got: body.vectors.len(),
            });
        }
        for v in &body.vectors {
            if v.len() != self.dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: self.dim,
                    got: v.len(),
                });
            }
        }
        Ok(body.vectors)
    }
}

impl Embedder for RemoteEmbedder {
    fn tag(&self) -> String {
        format!("remote:{}-d{}", self.url, self.dim)
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_query(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut v = self.request(&[text], "query")?;
        v.pop().ok_or(EmbedError::CountMismatch { expected: 1, got: 0 })
    }

    fn embed_docs(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size) {
            out.extend(self.request(batch, "doc")?);
        }
        Ok(out)
    }
}
