use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("no <{0}> tag in output")]
    Absent(String),
    #[error("<{0}> tag is never closed")]
    Unclosed(String),
}

/// Inner text of the first `<tag>...</tag>` pair, trimmed.
///
/// Same-name tags nested inside the body are balanced, so the outermost
/// element is returned whole; other tags inside it are left alone.
pub fn extract_tagged(text: &str, tag: &str) -> Result<String, ExtractError> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text.find(&open).ok_or_else(|| ExtractError::Absent(tag.to_string()))? + open.len();
    let mut depth = 1usize;
    let mut cursor = start;
    loop {
        let rest = &text[cursor..];
        let next_open = rest.find(&open);
        let next_close = rest.find(&close).ok_or_else(|| ExtractError::Unclosed(tag.to_string()))?;
        match next_open {
            Some(o) if o < next_close => {
                depth += 1;
                cursor += o + open.len();
            }
            _ => {
                depth -= 1;
                if depth == 0 {
                    return Ok(text[start..cursor + next_close].trim().to_string());
                }
                cursor += next_close + close.len();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrounding_prose_is_ignored() {
        assert_eq!(extract_tagged("ok <fact>(clear b1)</fact> done", "fact").unwrap(), "(clear b1)");
    }

    #[test]
    fn absent_and_unclosed() {
        assert_eq!(extract_tagged("just prose", "plan"), Err(ExtractError::Absent("plan".into())));
        assert_eq!(extract_tagged("<plan>(pickup a)", "plan"), Err(ExtractError::Unclosed("plan".into())));
    }

    #[test]
    fn other_tags_inside_body_survive() {
        let body = "print('<plan>')\nx = '</plan>'";
        let text = format!("Here:\n<generator>\n{body}\n</generator>\n<plan>nope</plan>");
        assert_eq!(extract_tagged(&text, "generator").unwrap(), body);
    }

    #[test]
    fn nested_same_tags_balance() {
        let text = "<g>a <g>b</g> c</g> tail</g>";
        assert_eq!(extract_tagged(text, "g").unwrap(), "a <g>b</g> c");
    }

    #[test]
    fn first_pair_wins() {
        assert_eq!(extract_tagged("<plan>1</plan><plan>2</plan>", "plan").unwrap(), "1");
    }
}
