//! Locating JSON objects inside free-form model output.

/// Returns the first balanced top-level `{...}` in `text`, honouring string
/// literals and escapes. Models tend to wrap JSON in prose or code fences.
pub fn first_json_object(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let mut search_from = 0;
    while let Some(rel) = text[search_from..].find('{') {
        let start = search_from + rel;
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        for (off, &b) in bytes[start..].iter().enumerate() {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        let candidate = &text[start..start + off + 1];
                        if serde_json::from_str::<serde_json::Value>(candidate).is_ok() {
                            return Some(candidate);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
        search_from = start + 1;
    }
    None
}

/// Parses a JSON object from model output. In strict mode the whole reply
/// (ignoring surrounding whitespace) must be the object.
pub fn parse_object(text: &str, strict: bool) -> Option<serde_json::Map<String, serde_json::Value>> {
    let slice = if strict { text.trim() } else { first_json_object(text)? };
    match serde_json::from_str(slice) {
        Ok(serde_json::Value::Object(map)) => Some(map),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_object_in_fences() {
        let t = "Sure!\n```json\n{\"a\": {\"b\": \"}\"}, \"c\": [1]}\n```\ntrailing {";
        assert_eq!(first_json_object(t), Some("{\"a\": {\"b\": \"}\"}, \"c\": [1]}"));
    }

    #[test]
    fn skips_unbalanced_prefix() {
        let t = "use {braces} like {\"x\": 1}";
        assert_eq!(first_json_object(t), Some("{\"x\": 1}"));
    }

    #[test]
    fn strict_mode_rejects_prose() {
        assert!(parse_object("ok {\"x\":1}", true).is_none());
        assert!(parse_object(" {\"x\":1}\n", true).is_some());
        assert!(parse_object("ok {\"x\":1}", false).is_some());
    }

    #[test]
    fn escaped_quotes() {
        let t = r#"{"q": "say \"hi\" {"}"#;
        assert_eq!(first_json_object(t), Some(t));
    }
}
