use serde::{Deserialize, Serialize};

use crate::domain::EvidenceDoc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    /// Window length in characters.
    pub max_chars: usize,
    /// Characters shared by consecutive windows.
    pub overlap: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        ChunkingConfig {
            max_chars: 1000,
            overlap: 200,
        }
    }
}

impl ChunkingConfig {
    pub fn stride(&self) -> usize {
        self.max_chars.saturating_sub(self.overlap).max(1)
    }
}

/// Start offsets (in characters) of the windows covering a text of `len`
/// characters. Windows advance by the stride until one reaches the end.
pub fn window_offsets(len: usize, cfg: ChunkingConfig) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let stride = cfg.stride();
    let mut starts = vec![0];
    let mut start = 0;
    while start + cfg.max_chars < len {
        start += stride;
        starts.push(start);
    }
    starts
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub parent_id: Option<String>,
    pub offset: usize,
    pub doc: EvidenceDoc,
}

/// Splits one record's text into windows; all-whitespace windows are dropped.
pub fn chunk_text(parent_id: Option<&str>, source: &str, title: &str, text: &str, cfg: ChunkingConfig) -> Vec<Chunk> {
    let chars: Vec<char> = text.chars().collect();
    window_offsets(chars.len(), cfg)
        .into_iter()
        .filter_map(|start| {
            let end = (start + cfg.max_chars).min(chars.len());
            let window: String = chars[start..end].iter().collect();
            if window.trim().is_empty() {
                return None;
            }
            Some(Chunk {
                parent_id: parent_id.map(str::to_string),
                offset: start,
                doc: EvidenceDoc::new(source, title, window),
            })
        })
        .collect()
}
