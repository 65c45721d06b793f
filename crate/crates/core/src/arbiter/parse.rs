use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnswerParseError {
    #[error("no answer label found")]
    NoLabelFound,
    #[error("more than one label in the answer position: {0:?}")]
    AmbiguousLabel(Vec<String>),
}

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)final[\s_]*answer\s*(?:is\b)?\s*[:：=\-–]?").expect("valid regex"))
}

/// Words that may sit between the marker and the label.
const FILLER: &[&str] = &[
    "the", "answer", "is", "option", "choice", "correct", "my", "final", "label",
];
const CONNECTORS: &[&str] = &["or", "and", "vs", "versus"];

struct Word<'a> {
    text: &'a str,
    start: usize,
    end: usize,
}

fn words(s: &str) -> Vec<Word<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(st)) => {
                out.push(Word {
                    text: &s[st..i],
                    start: st,
                    end: i,
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(st) = start {
        out.push(Word {
            text: &s[st..],
            start: st,
            end: s.len(),
        });
    }
    out
}

fn match_label<'l>(word: &str, allowed: &[&'l str]) -> Option<&'l str> {
    allowed.iter().copied().find(|l| l.eq_ignore_ascii_case(word))
}

fn is_connector(w: &str) -> bool {
    CONNECTORS.iter().any(|c| c.eq_ignore_ascii_case(w))
}

fn parse_segment<'l>(segment: &str, allowed: &[&'l str]) -> Result<&'l str, AnswerParseError> {
    let line = segment
        .trim_start()
        .lines()
        .find(|l| l.chars().any(char::is_alphanumeric))
        .unwrap_or("");
    let ws = words(line);
    let mut i = 0;
    while i < ws.len()
        && FILLER.iter().any(|f| f.eq_ignore_ascii_case(ws[i].text))
        && match_label(ws[i].text, allowed).is_none()
    {
        i += 1;
    }
    let Some(first) = ws.get(i) else {
        return Err(AnswerParseError::NoLabelFound);
    };
    let label = match_label(first.text, allowed).ok_or(AnswerParseError::NoLabelFound)?;

    // "A or B", "A/B", "A, B": a second, different label in the answer slot
    if let Some(next) = ws.get(i + 1) {
        let gap = line[first.end..next.start].trim();
        let rival = |w: &Word<'_>| match_label(w.text, allowed).filter(|l| *l != label);
        let ambiguous = if is_connector(next.text) && gap.is_empty() {
            ws.get(i + 2).and_then(&rival)
        } else if matches!(gap, "/" | "|" | "&" | "+") {
            rival(next)
        } else if gap == "," {
            // only a bare list counts; "yes, no doubt" does not
            rival(next).filter(|_| {
                ws.get(i + 2)
                    .is_none_or(|w| is_connector(w.text) || match_label(w.text, allowed).is_some())
            })
        } else {
            None
        };
        if let Some(other) = ambiguous {
            return Err(AnswerParseError::AmbiguousLabel(vec![
                label.to_string(),
                other.to_string(),
            ]));
        }
    }
    Ok(label)
}

/// Extracts the committed label from a model reply.
///
/// The last `Final Answer:` marker decides (case-insensitive; brackets,
/// bold markers and trailing punctuation are tolerated). Without a marker,
/// a reply consisting only of one label (optionally wrapped in punctuation)
/// is accepted.
pub fn parse_answer<'l>(text: &str, allowed: &[&'l str]) -> Result<&'l str, AnswerParseError> {
    if let Some(m) = marker().find_iter(text).last() {
        return parse_segment(&text[m.end()..], allowed);
    }
    let bare = text.trim().trim_matches(|c: char| !c.is_alphanumeric());
    match_label(bare, allowed).ok_or(AnswerParseError::NoLabelFound)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MCQ: &[&str] = &["A", "B", "C", "D"];

    #[test]
    fn bracketed() {
        assert_eq!(parse_answer("Reasoning... Final Answer: [C]", MCQ), Ok("C"));
    }

    #[test]
    fn lone_label() {
        assert_eq!(parse_answer("D", MCQ), Ok("D"));
    }

    #[test]
    fn either_or_is_ambiguous() {
        assert!(matches!(
            parse_answer("Final Answer: A or B", MCQ),
            Err(AnswerParseError::AmbiguousLabel(_))
        ));
    }
}
