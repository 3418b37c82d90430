//! Minimal s-expression reader for PDDL text.
//!
//! Comments (`;` to end of line) are dropped before tokenizing. Every node
//! remembers the byte offset it started at so higher layers can report
//! positions in the original text.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Symbol { text: String, offset: usize },
    List { items: Vec<SExpr>, offset: usize },
}

impl SExpr {
    pub fn offset(&self) -> usize {
        match self {
            SExpr::Symbol { offset, .. } | SExpr::List { offset, .. } => *offset,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            SExpr::Symbol { text, .. } => Some(text),
            SExpr::List { .. } => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List { items, .. } => Some(items),
            SExpr::Symbol { .. } => None,
        }
    }

    /// The leading symbol of a list, e.g. `define` in `(define ...)`.
    pub fn head(&self) -> Option<&str> {
        self.as_list()?.first()?.as_symbol()
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Symbol { text, .. } => f.write_str(text),
            SExpr::List { items, .. } => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SExprError {
    #[error("unbalanced parentheses: {open} list(s) still open at end of input (offset {offset})")]
    UnclosedList { open: usize, offset: usize },
    #[error("unexpected ')' at offset {offset}")]
    UnexpectedClose { offset: usize },
}

impl SExprError {
    pub fn offset(&self) -> usize {
        match self {
            SExprError::UnclosedList { offset, .. } | SExprError::UnexpectedClose { offset } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token<'a> {
    Open(usize),
    Close(usize),
    Symbol(&'a str, usize),
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'(' => {
                tokens.push(Token::Open(i));
                i += 1;
            }
            b')' => {
                tokens.push(Token::Close(i));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && !matches!(bytes[i], b'(' | b')' | b';')
                {
                    i += 1;
                }
                tokens.push(Token::Symbol(&text[start..i], start));
            }
        }
    }
    tokens
}

/// Parse every top-level expression in `text`.
pub fn parse_all(text: &str) -> Result<Vec<SExpr>, SExprError> {
    let mut stack: Vec<(usize, Vec<SExpr>)> = Vec::new();
    let mut top = Vec::new();
    for token in tokenize(text) {
        match token {
            Token::Open(offset) => stack.push((offset, Vec::new())),
            Token::Close(offset) => {
                let (start, items) = stack.pop().ok_or(SExprError::UnexpectedClose { offset })?;
                let node = SExpr::List { items, offset: start };
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(node),
                    None => top.push(node),
                }
            }
            Token::Symbol(text, offset) => {
                let node = SExpr::Symbol { text: text.to_string(), offset };
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(node),
                    None => top.push(node),
                }
            }
        }
    }
    if !stack.is_empty() {
        return Err(SExprError::UnclosedList { open: stack.len(), offset: text.len() });
    }
    Ok(top)
}
