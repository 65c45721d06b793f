//! Corpus ingestion, embedding and exact dense retrieval.

mod chunk;
mod embed;
mod index;
mod ingest;

pub use chunk::{chunk_text, window_offsets, Chunk, ChunkingConfig};
pub use embed::{EmbedError, Embedder, MockEmbedder, RemoteEmbedder};
pub use index::{dot, Hit, IndexError, IndexManifest, ScoredDoc, VectorIndex, DOCS_FILE, MANIFEST_FILE, VECTORS_FILE};
pub use ingest::{ingest, ingest_records, read_corpus, CorpusRecord, IngestError};

use crate::domain::EmbedderConfig;

pub fn build_embedder(cfg: &EmbedderConfig) -> Result<Box<dyn Embedder>, EmbedError> {
    Ok(match cfg {
        EmbedderConfig::Mock { dim, seed } => Box::new(MockEmbedder::new(*dim, *seed)),
        EmbedderConfig::Remote { url, dim, batch_size } => {
            Box::new(RemoteEmbedder::new(url.clone(), *dim, *batch_size)?)
        }
    })
}
