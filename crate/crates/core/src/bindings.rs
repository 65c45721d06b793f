//! Text renderings of pipeline state used as prompt bindings.

use crate::domain::{ClinicalSchema, EvidenceDoc, EvidenceReport, Question};

pub fn research_topic(q: &Question) -> String {
    q.render_with_options()
}

pub fn clinical_schema(s: &ClinicalSchema) -> String {
    serde_json::to_string(s).expect("schema serializes")
}

pub fn query_list(queries: &[String]) -> String {
    serde_json::to_string(queries).expect("string list serializes")
}

pub fn report(r: &EvidenceReport) -> String {
    serde_json::to_string_pretty(r).expect("report serializes")
}

/// First `max_chars` characters, with an ellipsis when cut.
pub fn truncate_chars(text: &str, max_chars: usize) -> String {
    match text.char_indices().nth(max_chars) {
        Some((cut, _)) => format!("{}...", &text[..cut]),
        None => text.to_string(),
    }
}

/// One `[doc_id] title: text` line per document.
pub fn summaries<'a, I>(docs: I, max_chars: usize) -> String
where
    I: IntoIterator<Item = &'a EvidenceDoc>,
{
    let lines: Vec<String> = docs
        .into_iter()
        .map(|d| {
            let body = truncate_chars(&d.text, max_chars).replace('\n', " ");
            format!("[{}] {}: {}", d.doc_id, d.title, body)
        })
        .collect();
    if lines.is_empty() {
        "(no evidence retrieved)".to_string()
    } else {
        lines.join("\n")
    }
}
