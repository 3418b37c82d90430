use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{opaque, ActionSchema, Atom, AtomSet, DomainModel, Object, ProblemModel};
use crate::sexpr::{self, SExpr, SExprError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error(transparent)]
    Syntax(#[from] SExprError),
    #[error("expected {expected} at offset {offset}")]
    Expected { expected: &'static str, offset: usize },
    #[error("action `{action}` is missing its {part} (offset {offset})")]
    MissingActionPart { action: String, part: &'static str, offset: usize },
    #[error("variable `{variable}` in action `{action}` is not a parameter (offset {offset})")]
    UnboundVariable { action: String, variable: String, offset: usize },
    #[error("duplicate `{section}` section at offset {offset}")]
    DuplicateSection { section: String, offset: usize },
    #[error("entry in `{section}` is not a ground atom (offset {offset})")]
    NonAtomEntry { section: &'static str, offset: usize },
    #[error("negative literal in `{section}` at offset {offset}")]
    NegativeLiteral { section: &'static str, offset: usize },
    #[error("nested `and` in `{section}` at offset {offset}")]
    NestedConjunction { section: &'static str, offset: usize },
    #[error("unsupported construct `{construct}` at offset {offset}")]
    Unsupported { construct: String, offset: usize },
    #[error("unknown predicate `{predicate}` at offset {offset}")]
    UnknownPredicate { predicate: String, offset: usize },
    #[error("predicate `{predicate}` takes {expected} argument(s), found {found} (offset {offset})")]
    ArityMismatch { predicate: String, expected: usize, found: usize, offset: usize },
}

impl PddlError {
    pub fn offset(&self) -> usize {
        match self {
            PddlError::Syntax(e) => e.offset(),
            PddlError::Expected { offset, .. }
            | PddlError::MissingActionPart { offset, .. }
            | PddlError::UnboundVariable { offset, .. }
            | PddlError::DuplicateSection { offset, .. }
            | PddlError::NonAtomEntry { offset, .. }
            | PddlError::NegativeLiteral { offset, .. }
            | PddlError::NestedConjunction { offset, .. }
            | PddlError::Unsupported { offset, .. }
            | PddlError::UnknownPredicate { offset, .. }
            | PddlError::ArityMismatch { offset, .. } => *offset,
        }
    }
}

type Result<T> = std::result::Result<T, PddlError>;

fn lower(s: &str) -> String {
    s.to_lowercase()
}

/// Locate the single `(define (<kind> name) ...)` form and return its name and sections.
fn define_form<'a>(
    exprs: &'a [SExpr],
    kind: &'static str,
    text_len: usize,
) -> Result<(String, &'a [SExpr])> {
    let define = exprs
        .iter()
        .find(|e| e.head().is_some_and(|h| h.eq_ignore_ascii_case("define")))
        .ok_or(PddlError::Expected { expected: "(define ...)", offset: exprs.first().map_or(text_len, SExpr::offset),
        })?;
    let items = define.as_list().unwrap_or_default();
    let header = items.get(1).ok_or(PddlError::Expected {
        expected: "name declaration after define",
        offset: define.offset(),
    })?;
    let name = match header.as_list() {
        Some([tag, name]) if tag.as_symbol().is_some_and(|t| t.eq_ignore_ascii_case(kind)) => {
            name.as_symbol().map(lower)
        }
        _ => None,
    };
    let name = name.ok_or(PddlError::Expected {
        expected: match kind {
            "domain" => "(domain <name>)",
            _ => "(problem <name>)",
        },
        offset: header.offset(),
    })?;
    Ok((name, &items[2..]))
}

fn section_keyword(expr: &SExpr) -> Result<String> {
    match expr.head() {
        Some(h) if h.starts_with(':') => Ok(lower(h)),
        _ => Err(PddlError::Expected { expected: "a `(:section ...)` form", offset: expr.offset() }),
    }
}

/// Parse a ground or lifted atom `(pred arg ...)`; `None` if `expr` is not of that shape.
fn atom_of(expr: &SExpr) -> Option<Atom> {
    let items = expr.as_list()?;
    let (head, rest) = items.split_first()?;
    let predicate = head.as_symbol()?;
    if predicate.starts_with(':') {
        return None;
    }
    let args: Option<Vec<&str>> = rest.iter().map(SExpr::as_symbol).collect();
    Some(Atom::new(predicate, args?))
}

fn is_head(expr: &SExpr, word: &str) -> bool {
    expr.head().is_some_and(|h| h.eq_ignore_ascii_case(word))
}

/// Parse a typed list such as `a b - t1 c, d - t2 e` into names with optional tags.
fn typed_list(items: &[SExpr]) -> Result<Vec<(String, Option<String>, usize)>> {
    let mut out: Vec<(String, Option<String>, usize)> = Vec::new();
    let mut pending = 0usize;
    let mut iter = items.iter();
    while let Some(item) = iter.next() {
        let sym = item
            .as_symbol()
            .ok_or(PddlError::Expected { expected: "a name", offset: item.offset() })?;
        if sym == "-" {
            let ty = iter
                .next()
                .and_then(|t| t.as_symbol())
                .ok_or(PddlError::Expected { expected: "a type after `-`", offset: item.offset() })?;
            let ty = lower(ty.trim_end_matches(','));
            let len = out.len();
            for entry in &mut out[len - pending..] {
                entry.1 = Some(ty.clone());
            }
            pending = 0;
            continue;
        }
        for piece in sym.split(',').filter(|p| !p.is_empty()) {
            out.push((lower(piece), None, item.offset()));
            pending += 1;
        }
    }
    Ok(out)
}

pub fn parse_domain(text: &str) -> Result<DomainModel> {
    let exprs = sexpr::parse_all(text)?;
    let (name, sections) = define_form(&exprs, "domain", text.len())?;
    let mut domain = DomainModel {
        name,
        requirements: Vec::new(),
        predicates: BTreeMap::new(),
        actions: Vec::new(),
        extra_sections: Vec::new(),
    };
    for section in sections {
        let keyword = section_keyword(section)?;
        let body = &section.as_list().unwrap_or_default()[1..];
        match keyword.as_str() {
            ":requirements" => {
                for req in body {
                    let r = req
                        .as_symbol()
                        .ok_or(PddlError::Expected { expected: "a requirement flag", offset: req.offset() })?;
                    domain.requirements.push(lower(r));
                }
            }
            ":predicates" => {
                for decl in body {
                    let items = decl.as_list().ok_or(PddlError::Expected {
                        expected: "a predicate declaration",
                        offset: decl.offset(),
                    })?;
                    let (head, params) = items.split_first().ok_or(PddlError::Expected {
                        expected: "a predicate name",
                        offset: decl.offset(),
                    })?;
                    let pname = head
                        .as_symbol()
                        .ok_or(PddlError::Expected { expected: "a predicate name", offset: head.offset() })?;
                    let arity = typed_list(params)?.len();
                    domain.predicates.insert(lower(pname), arity);
                }
            }
            ":action" => domain.actions.push(parse_action(section)?),
            _ => domain.extra_sections.push(opaque(section)),
        }
    }
    for action in &domain.actions {
        for atom in action.preconditions.iter().chain(&action.add_effects).chain(&action.del_effects) {
            match domain.predicates.get(&atom.predicate) {
                None => {
                    return Err(PddlError::UnknownPredicate {
                        predicate: atom.predicate.clone(),
                        offset: action_offset(sections, &action.name),
                    })
                }
                Some(&arity) if arity != atom.arity() => {
                    return Err(PddlError::ArityMismatch {
                        predicate: atom.predicate.clone(),
                        expected: arity,
                        found: atom.arity(),
                        offset: action_offset(sections, &action.name),
                    })
                }
                _ => {}
            }
        }
    }
    Ok(domain)
}

fn action_offset(sections: &[SExpr], name: &str) -> usize {
    sections
        .iter()
        .find(|s| {
            is_head(s, ":action")
                && s.as_list()
                    .and_then(|l| l.get(1))
                    .and_then(SExpr::as_symbol)
                    .is_some_and(|n| n.eq_ignore_ascii_case(name))
        })
        .map_or(0, SExpr::offset)
}

fn parse_action(section: &SExpr) -> Result<ActionSchema> {
    let items = section.as_list().unwrap_or_default();
    let name = items
        .get(1)
        .and_then(SExpr::as_symbol)
        .map(lower)
        .ok_or(PddlError::Expected { expected: "an action name", offset: section.offset() })?;
    let mut parts: BTreeMap<String, &SExpr> = BTreeMap::new();
    let mut rest = items[2..].iter();
    while let Some(key) = rest.next() {
        let k = key
            .as_symbol()
            .filter(|k| k.starts_with(':'))
            .ok_or(PddlError::Expected { expected: "an action keyword", offset: key.offset() })?;
        let value = rest.next().ok_or(PddlError::MissingActionPart {
            action: name.clone(),
            part: "keyword value",
            offset: key.offset(),
        })?;
        if parts.insert(lower(k), value).is_some() {
            return Err(PddlError::DuplicateSection { section: lower(k), offset: key.offset() });
        }
    }
    let params_expr = parts.get(":parameters").ok_or(PddlError::MissingActionPart {
        action: name.clone(),
        part: ":parameters",
        offset: section.offset(),
    })?;
    let param_items = params_expr
        .as_list()
        .ok_or(PddlError::Expected { expected: "a parameter list", offset: params_expr.offset() })?;
    let mut params = Vec::new();
    for (param, _, offset) in typed_list(param_items)? {
        if !param.starts_with('?') {
            return Err(PddlError::Expected { expected: "a `?variable` parameter", offset });
        }
        params.push(param);
    }
    let effect = parts.get(":effect").ok_or(PddlError::MissingActionPart {
        action: name.clone(),
        part: ":effect",
        offset: section.offset(),
    })?;

    let mut preconditions = AtomSet::new();
    if let Some(pre) = parts.get(":precondition") {
        collect_condition(pre, &mut preconditions)?;
    }
    let mut add_effects = AtomSet::new();
    let mut del_effects = AtomSet::new();
    collect_effect(effect, &mut add_effects, &mut del_effects)?;

    let bound: BTreeSet<&str> = params.iter().map(String::as_str).collect();
    let check = |expr: &SExpr, atoms: &AtomSet| -> Result<()> {
        for atom in atoms {
            if let Some(var) = atom.args.iter().find(|a| a.starts_with('?') && !bound.contains(a.as_str())) {
                return Err(PddlError::UnboundVariable {
                    action: name.clone(),
                    variable: var.clone(),
                    offset: find_symbol(expr, var).unwrap_or(expr.offset()),
                });
            }
        }
        Ok(())
    };
    if let Some(pre) = parts.get(":precondition") {
        check(pre, &preconditions)?;
    }
    check(effect, &add_effects)?;
    check(effect, &del_effects)?;

    Ok(ActionSchema { name, params, preconditions, add_effects, del_effects })
}

fn find_symbol(expr: &SExpr, needle: &str) -> Option<usize> {
    match expr {
        SExpr::Symbol { text, offset } => text.eq_ignore_ascii_case(needle).then_some(*offset),
        SExpr::List { items, .. } => items.iter().find_map(|i| find_symbol(i, needle)),
    }
}

fn collect_condition(expr: &SExpr, out: &mut AtomSet) -> Result<()> {
    match expr.as_list() {
        Some([]) => Ok(()),
        Some(items) if is_head(expr, "and") => {
            for item in &items[1..] {
                collect_condition(item, out)?;
            }
            Ok(())
        }
        Some(_) => {
            if let Some(head) = expr.head() {
                let h = lower(head);
                if matches!(h.as_str(), "not" | "or" | "imply" | "forall" | "exists" | "when" | "=") {
                    return Err(PddlError::Unsupported { construct: h, offset: expr.offset() });
                }
            }
            let atom = atom_of(expr)
                .ok_or(PddlError::Expected { expected: "an atom", offset: expr.offset() })?;
            out.insert(atom);
            Ok(())
        }
        None => Err(PddlError::Expected { expected: "a condition", offset: expr.offset() }),
    }
}

fn collect_effect(expr: &SExpr, add: &mut AtomSet, del: &mut AtomSet) -> Result<()> {
    match expr.as_list() {
        Some([]) => Ok(()),
        Some(items) if is_head(expr, "and") => {
            for item in &items[1..] {
                collect_effect(item, add, del)?;
            }
            Ok(())
        }
        Some(items) if is_head(expr, "not") => {
            let inner = match items {
                [_, inner] => atom_of(inner),
                _ => None,
            };
            let atom = inner.ok_or(PddlError::Expected { expected: "(not <atom>)", offset: expr.offset() })?;
            del.insert(atom);
            Ok(())
        }
        Some(_) => {
            if let Some(head) = expr.head() {
                let h = lower(head);
                if matches!(h.as_str(), "when" | "forall" | "increase" | "decrease" | "assign") {
                    return Err(PddlError::Unsupported { construct: h, offset: expr.offset() });
                }
            }
            let atom = atom_of(expr)
                .ok_or(PddlError::Expected { expected: "an effect atom", offset: expr.offset() })?;
            add.insert(atom);
            Ok(())
        }
        None => Err(PddlError::Expected { expected: "an effect", offset: expr.offset() }),
    }
}

/// Collect a fact section. One level of `and` is flattened.
fn fact_entries(
    entries: &[SExpr],
    section: &'static str,
    nested: bool,
    out: &mut AtomSet,
) -> Result<()> {
    for entry in entries {
        if is_head(entry, "and") {
            if nested {
                return Err(PddlError::NestedConjunction { section, offset: entry.offset() });
            }
            fact_entries(&entry.as_list().unwrap_or_default()[1..], section, true, out)?;
        } else if is_head(entry, "not") {
            return Err(PddlError::NegativeLiteral { section, offset: entry.offset() });
        } else {
            let atom = atom_of(entry)
                .filter(|a| !a.args.iter().any(|arg| arg.starts_with('?')))
                .ok_or(PddlError::NonAtomEntry { section, offset: entry.offset() })?;
            out.insert(atom);
        }
    }
    Ok(())
}

fn check_against_domain(atoms: &AtomSet, domain: &DomainModel, offset: usize) -> Result<()> {
    for atom in atoms {
        match domain.predicates.get(&atom.predicate) {
            None => {
                return Err(PddlError::UnknownPredicate { predicate: atom.predicate.clone(), offset })
            }
            Some(&arity) if arity != atom.arity() => {
                return Err(PddlError::ArityMismatch {
                    predicate: atom.predicate.clone(),
                    expected: arity,
                    found: atom.arity(),
                    offset,
                })
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn parse_problem(text: &str, domain: Option<&DomainModel>) -> Result<ProblemModel> {
    let exprs = sexpr::parse_all(text)?;
    let (problem_name, sections) = define_form(&exprs, "problem", text.len())?;
    let mut domain_name = None;
    let mut objects = None;
    let mut init: Option<(AtomSet, usize)> = None;
    let mut goal: Option<(AtomSet, usize)> = None;

    for section in sections {
        let keyword = section_keyword(section)?;
        let body = &section.as_list().unwrap_or_default()[1..];
        let duplicate = || PddlError::DuplicateSection { section: keyword.clone(), offset: section.offset() };
        match keyword.as_str() {
            ":domain" => {
                let name = body
                    .first()
                    .and_then(SExpr::as_symbol)
                    .ok_or(PddlError::Expected { expected: "a domain name", offset: section.offset() })?;
                if domain_name.replace(lower(name)).is_some() {
                    return Err(duplicate());
                }
            }
            ":objects" => {
                let list: Vec<Object> = typed_list(body)?
                    .into_iter()
                    .map(|(name, type_tag, _)| Object { name, type_tag })
                    .collect();
                if objects.replace(list).is_some() {
                    return Err(duplicate());
                }
            }
            ":init" => {
                let mut atoms = AtomSet::new();
                fact_entries(body, ":init", false, &mut atoms)?;
                if init.replace((atoms, section.offset())).is_some() {
                    return Err(duplicate());
                }
            }
            ":goal" => {
                let mut atoms = AtomSet::new();
                fact_entries(body, ":goal", false, &mut atoms)?;
                if goal.replace((atoms, section.offset())).is_some() {
                    return Err(duplicate());
                }
            }
            _ => {
                return Err(PddlError::Unsupported { construct: keyword, offset: section.offset() });
            }
        }
    }
    let define_offset = exprs.iter().find(|e| is_head(e, "define")).map_or(0, SExpr::offset);
    let domain_name =
        domain_name.ok_or(PddlError::Expected { expected: "a (:domain ...) section", offset: define_offset })?;
    let (init, init_offset) =
        init.ok_or(PddlError::Expected { expected: "an (:init ...) section", offset: define_offset })?;
    let (goal, goal_offset) =
        goal.ok_or(PddlError::Expected { expected: "a (:goal ...) section", offset: define_offset })?;
    if let Some(domain) = domain {
        check_against_domain(&init, domain, init_offset)?;
        check_against_domain(&goal, domain, goal_offset)?;
    }
    Ok(ProblemModel { problem_name, domain_name, objects: objects.unwrap_or_default(), init, goal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::DOMAIN_PDDL;

    #[test]
    fn shipped_domain_has_expected_shape() {
        let d = parse_domain(DOMAIN_PDDL).unwrap();
        assert_eq!(d.name, "blocksworld");
        assert_eq!(d.requirements, vec![":strips"]);
        assert_eq!(d.predicates.len(), 5);
        assert_eq!(d.predicates["on"], 2);
        assert_eq!(d.predicates["arm-empty"], 0);
        let names: Vec<_> = d.actions.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["pickup", "putdown", "stack", "unstack"]);
        let pickup = d.action("pickup").unwrap();
        assert_eq!(pickup.params, ["?ob"]);
        assert_eq!(pickup.preconditions.len(), 3);
        assert_eq!(pickup.add_effects, [Atom::new("holding", ["?ob"])].into());
        assert_eq!(pickup.del_effects.len(), 3);
        let unstack = d.action("unstack").unwrap();
        assert_eq!(unstack.params.len(), 2);
        assert_eq!(unstack.add_effects.len(), 2);
        assert_eq!(unstack.del_effects.len(), 3);
    }

    #[test]
    fn empty_domain() {
        let d = parse_domain("(define (domain d) (:predicates))").unwrap();
        assert!(d.predicates.is_empty());
        assert!(d.actions.is_empty());
    }

    #[test]
    fn dropping_a_paren_fails_at_end() {
        let idx = DOMAIN_PDDL.rfind(')').unwrap();
        let mut broken = DOMAIN_PDDL.to_string();
        broken.remove(idx);
        let err = parse_domain(&broken).unwrap_err();
        assert!(matches!(err, PddlError::Syntax(SExprError::UnclosedList { .. })));
        assert_eq!(err.offset(), broken.len());
    }

    #[test]
    fn unbound_variable_is_rejected_with_offset() {
        let text = "(define (domain d) (:predicates (p ?x))\n (:action a :parameters (?x) :effect (p ?y)))";
        let err = parse_domain(text).unwrap_err();
        assert!(matches!(err, PddlError::UnboundVariable { ref variable, .. } if variable == "?y"));
        assert_eq!(err.offset(), text.find("?y").unwrap());
    }

    #[test]
    fn missing_effect_is_reported() {
        let text = "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (p ?x)))";
        assert!(matches!(
            parse_domain(text),
            Err(PddlError::MissingActionPart { part: ":effect", .. })
        ));
    }

    #[test]
    fn unknown_sections_are_kept_opaque() {
        let text = "(define (domain d) (:types block) (:predicates (p ?x)))";
        let d = parse_domain(text).unwrap();
        assert_eq!(d.extra_sections, vec!["(:types block)"]);
    }

    #[test]
    fn empty_problem_sections() {
        let p = parse_problem("(define (problem p)(:domain d)(:objects a)(:init)(:goal (and)))", None).unwrap();
        assert!(p.init.is_empty());
        assert!(p.goal.is_empty());
        assert_eq!(p.object_names(), ["a"]);
    }

    #[test]
    fn typed_objects_with_commas_drop_types() {
        let text = "(define (problem p) (:domain d) (:objects obj1 obj2 - type1 obj3, obj4 - type2)
            (:init (predicate1 obj1 obj3)) (:goal (predicate1 obj1 obj4)))";
        let p = parse_problem(text, None).unwrap();
        assert_eq!(p.object_names(), ["obj1", "obj2", "obj3", "obj4"]);
        assert_eq!(p.objects[3].type_tag.as_deref(), Some("type2"));
        assert_eq!(p.goal.len(), 1, "single-atom goal without `and`");
    }

    #[test]
    fn self_relation_goal_parses_with_defect() {
        let p = parse_problem(
            "(define (problem p) (:domain d) (:objects b1) (:init (arm-empty)) (:goal (and (on b1 b1))))",
            None,
        )
        .unwrap();
        assert_eq!(
            p.defects(),
            vec![crate::pddl::ProblemDefect::SelfRelation(Atom::new("on", ["b1", "b1"]))]
        );
    }

    #[test]
    fn problem_errors() {
        let dup = "(define (problem p) (:domain d) (:init) (:init) (:goal (and)))";
        assert!(matches!(parse_problem(dup, None), Err(PddlError::DuplicateSection { .. })));

        let neg = "(define (problem p) (:domain d) (:init (not (clear a))) (:goal (and)))";
        assert!(matches!(parse_problem(neg, None), Err(PddlError::NegativeLiteral { section: ":init", .. })));

        let junk = "(define (problem p) (:domain d) (:init clear) (:goal (and)))";
        assert!(matches!(parse_problem(junk, None), Err(PddlError::NonAtomEntry { .. })));

        let deep = "(define (problem p) (:domain d) (:init (and (and (clear a)))) (:goal (and)))";
        assert!(matches!(parse_problem(deep, None), Err(PddlError::NestedConjunction { .. })));

        let domain = parse_domain(DOMAIN_PDDL).unwrap();
        let arity = "(define (problem p) (:domain d) (:objects a) (:init (clear a a)) (:goal (and)))";
        assert!(matches!(
            parse_problem(arity, Some(&domain)),
            Err(PddlError::ArityMismatch { expected: 1, found: 2, .. })
        ));
        assert!(parse_problem(arity, None).is_ok());
    }

    #[test]
    fn init_flattens_one_and_level() {
        let p = parse_problem(
            "(define (problem p) (:domain d) (:objects a) (:init (and (clear a) (arm-empty))) (:goal (and)))",
            None,
        )
        .unwrap();
        assert_eq!(p.init.len(), 2);
    }

    #[test]
    fn case_is_normalized() {
        let p = parse_problem(
            "(DEFINE (PROBLEM P) (:DOMAIN BW) (:OBJECTS Block1) (:INIT (Clear Block1)) (:GOAL (AND (On-Table Block1))))",
            None,
        )
        .unwrap();
        assert_eq!(p.domain_name, "bw");
        assert!(p.init.contains(&Atom::new("clear", ["block1"])));
    }
}
