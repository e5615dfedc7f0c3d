//! Response cleaning: normalization and structured-answer extraction.

/// Normalizes raw model output: non-ASCII characters are removed, all runs of
/// whitespace (line breaks included) collapse to single spaces, ends trimmed.
pub fn clean_response(raw: &str) -> String {
    let ascii: String = raw.chars().filter(char::is_ascii).collect();
    ascii.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Pulls the answer out of a JSON object embedded anywhere in the text, code
/// fences and surrounding prose included. The first well-formed object with
/// an `"answer"` key wins; its value is returned as text (numbers are
/// stringified). `None` means judging falls back to the full cleaned text.
pub fn extract_json_answer(text: &str) -> Option<String> {
    for (i, _) in text.match_indices('{') {
        let mut stream =
            serde_json::Deserializer::from_str(&text[i..]).into_iter::<serde_json::Value>();
        let Some(Ok(value)) = stream.next() else { continue };
        let Some(object) = value.as_object() else { continue };
        match object.get("answer") {
            Some(serde_json::Value::String(s)) => return Some(s.clone()),
            Some(serde_json::Value::Number(n)) => return Some(n.to_string()),
            _ => continue,
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn collapses_line_breaks_and_whitespace() {
        assert_eq!(
            clean_response("Sure!\n{\"answer\": \"3. sometimes\"}"),
            "Sure! {\"answer\": \"3. sometimes\"}"
        );
        assert_eq!(clean_response("  a\t\tb \r\n c  "), "a b c");
        assert_eq!(clean_response(""), "");
    }

    #[test]
    fn strips_non_ascii() {
        assert_eq!(clean_response("café ☕ 5."), "caf 5.");
        assert_eq!(clean_response("“quoted”"), "quoted");
    }

    #[test]
    fn extracts_plain_answer_object() {
        assert_eq!(
            extract_json_answer(r#"{"answer": "5. very often"}"#).as_deref(),
            Some("5. very often")
        );
    }

    #[test]
    fn extracts_from_fences_and_prose() {
        assert_eq!(
            extract_json_answer(r#"Here you go: ```json {"answer": "2. No"} ``` hope that helps"#)
                .as_deref(),
            Some("2. No")
        );
    }

    #[test]
    fn extracts_from_nested_object() {
        let text = r#"{"meta": 1, "inner": {"answer": "4."}}"#;
        assert_eq!(extract_json_answer(text).as_deref(), Some("4."));
    }

    #[test]
    fn numeric_answers_are_stringified() {
        assert_eq!(extract_json_answer(r#"{"answer": 3}"#).as_deref(), Some("3"));
    }

    #[test]
    fn absent_when_no_structured_content() {
        assert_eq!(extract_json_answer("no structured content"), None);
        assert_eq!(extract_json_answer("{broken"), None);
        assert_eq!(extract_json_answer(r#"{"other": "key"}"#), None);
        assert_eq!(extract_json_answer(""), None);
    }

    #[test]
    fn first_answer_object_wins() {
        let text = r#"{"answer": "1."} and then {"answer": "2."}"#;
        assert_eq!(extract_json_answer(text).as_deref(), Some("1."));
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(raw in ".*") {
            let once = clean_response(&raw);
            prop_assert_eq!(clean_response(&once), once);
        }

        #[test]
        fn cleaned_text_is_ascii_with_single_spaces(raw in ".*") {
            let cleaned = clean_response(&raw);
            prop_assert!(cleaned.is_ascii());
            prop_assert!(!cleaned.contains("  "));
            prop_assert_eq!(cleaned.trim(), &cleaned);
        }
    }
}
