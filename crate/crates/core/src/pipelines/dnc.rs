use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{Atom, DomainModel};
use crate::sexpr::{parse_all, SExpr};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum FactIssue {
    #[error("fact contains a section header")]
    SectionHeader,
    #[error("fact is not well-formed: {0}")]
    Malformed(String),
    #[error("fact contains no atom")]
    Empty,
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("`{predicate}` takes {expected} argument(s), got {found}")]
    Arity { predicate: String, expected: usize, found: usize },
}

/// Remove `)` characters that close nothing, as in `(p a b))`.
fn drop_unmatched_closers(text: &str) -> String {
    let mut depth = 0usize;
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '(' => depth += 1,
            ')' if depth == 0 => continue,
            ')' => depth -= 1,
            _ => {}
        }
        out.push(ch);
    }
    out
}

fn collect_atoms(expr: &SExpr, out: &mut Vec<Atom>) -> Result<(), FactIssue> {
    let items = expr.as_list().ok_or_else(|| FactIssue::Malformed(format!("bare symbol `{expr}`")))?;
    let head = items.first().and_then(SExpr::as_symbol).ok_or_else(|| FactIssue::Malformed(expr.to_string()))?;
    if head.eq_ignore_ascii_case("and") {
        for child in &items[1..] {
            collect_atoms(child, out)?;
        }
        return Ok(());
    }
    let args = items[1..]
        .iter()
        .map(|a| a.as_symbol().ok_or_else(|| FactIssue::Malformed(expr.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if args.iter().any(|a| a.starts_with('?')) {
        return Err(FactIssue::Malformed(format!("variable in `{expr}`")));
    }
    out.push(Atom::new(head, args));
    Ok(())
}

/// Atoms of one fact answer.
///
/// Stray closing parentheses and `and` wrappers are tolerated; section
/// headers, negations, variables and atoms the domain cannot express are not.
pub fn parse_fact(text: &str, domain: &DomainModel) -> Result<Vec<Atom>, FactIssue> {
    let lower = text.to_lowercase();
    if lower.contains(":init") || lower.contains(":goal") {
        return Err(FactIssue::SectionHeader);
    }
    let cleaned = drop_unmatched_closers(text);
    let exprs = parse_all(&cleaned).map_err(|e| FactIssue::Malformed(e.to_string()))?;
    let mut atoms = Vec::new();
    for expr in &exprs {
        collect_atoms(expr, &mut atoms)?;
    }
    if atoms.is_empty() {
        return Err(FactIssue::Empty);
    }
    for atom in &atoms {
        let expected =
            *domain.predicates.get(&atom.predicate).ok_or_else(|| FactIssue::UnknownPredicate(atom.predicate.clone()))?;
        if expected != atom.arity() {
            return Err(FactIssue::Arity { predicate: atom.predicate.clone(), expected, found: atom.arity() });
        }
    }
    Ok(atoms)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("header is unusable: {0}")]
pub struct HeaderIssue(pub String);

/// Check that `header` is a single `(define ...)` form.
pub(crate) fn check_header(header: &str) -> Result<(), HeaderIssue> {
    let exprs = parse_all(header).map_err(|e| HeaderIssue(e.to_string()))?;
    match exprs.as_slice() {
        [single] if single.head().is_some_and(|h| h.eq_ignore_ascii_case("define")) => Ok(()),
        _ => Err(HeaderIssue("expected exactly one (define ...) form".into())),
    }
}

/// Splice init and goal facts into a header's `define` form.
pub fn consolidate(header: &str, init: &[Atom], goal: &[Atom]) -> String {
    let body = header.trim_end();
    let body = body.strip_suffix(')').unwrap_or(body).trim_end();
    let mut out = String::from(body);
    out.push_str("\n  (:init\n");
    for atom in init {
        out.push_str(&format!("    {atom}\n"));
    }
    out.push_str("  )\n  (:goal (and\n");
    for atom in goal {
        out.push_str(&format!("    {atom}\n"));
    }
    out.push_str("  ))\n)\n");
    out
}
