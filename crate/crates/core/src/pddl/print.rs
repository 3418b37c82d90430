use std::fmt::Write;

use super::{Atom, AtomSet, DomainModel, Object, ProblemModel};

fn conjunction(atoms: impl IntoIterator<Item = String>) -> String {
    let parts: Vec<String> = atoms.into_iter().collect();
    match parts.len() {
        0 => "()".to_string(),
        _ => format!("(and {})", parts.join(" ")),
    }
}

/// Canonical domain text. Predicate parameters are renamed `?x1 ?x2 ...`
/// since only arities are modelled.
pub fn print_domain(domain: &DomainModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", domain.name);
    if !domain.requirements.is_empty() {
        let _ = writeln!(out, "  (:requirements {})", domain.requirements.join(" "));
    }
    out.push_str("  (:predicates");
    for (name, arity) in &domain.predicates {
        let vars: Vec<String> = (1..=*arity).map(|i| format!(" ?x{i}")).collect();
        let _ = write!(out, "\n    ({name}{})", vars.concat());
    }
    out.push_str(")\n");
    for extra in &domain.extra_sections {
        let _ = writeln!(out, "  {extra}");
    }
    for action in &domain.actions {
        let _ = writeln!(out, "  (:action {}", action.name);
        let _ = writeln!(out, "    :parameters ({})", action.params.join(" "));
        let _ = writeln!(
            out,
            "    :precondition {}",
            conjunction(action.preconditions.iter().map(Atom::to_string))
        );
        let effects = action
            .add_effects
            .iter()
            .map(Atom::to_string)
            .chain(action.del_effects.iter().map(|a| format!("(not {a})")));
        let _ = writeln!(out, "    :effect {})", conjunction(effects));
    }
    out.push_str(")\n");
    out
}

fn objects_line(objects: &[Object]) -> String {
    let mut words = Vec::new();
    let mut i = 0;
    while i < objects.len() {
        let tag = &objects[i].type_tag;
        let mut j = i;
        while j < objects.len() && &objects[j].type_tag == tag {
            words.push(objects[j].name.clone());
            j += 1;
        }
        if let Some(t) = tag {
            words.push("-".to_string());
            words.push(t.clone());
        }
        i = j;
    }
    words.join(" ")
}

fn fact_block(out: &mut String, atoms: &AtomSet) {
    for atom in atoms {
        let _ = writeln!(out, "    {atom}");
    }
}

/// Canonical problem text: one atom per line, atoms sorted by (predicate, args).
///
/// Objects keep declaration order. An untyped object declared before a typed
/// group cannot be represented in PDDL's typed-list syntax and will pick up
/// the following group's type on re-parse.
pub fn print_problem(problem: &ProblemModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", problem.problem_name);
    let _ = writeln!(out, "  (:domain {})", problem.domain_name);
    let _ = writeln!(out, "  (:objects {})", objects_line(&problem.objects));
    out.push_str("  (:init\n");
    fact_block(&mut out, &problem.init);
    out.push_str("  )\n");
    out.push_str("  (:goal (and\n");
    fact_block(&mut out, &problem.goal);
    out.push_str("  ))\n");
    out.push_str(")\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::DOMAIN_PDDL;
    use crate::pddl::{parse_domain, parse_problem};

    #[test]
    fn domain_round_trip() {
        let d = parse_domain(DOMAIN_PDDL).unwrap();
        let printed = print_domain(&d);
        assert_eq!(parse_domain(&printed).unwrap(), d);
        assert_eq!(print_domain(&parse_domain(&printed).unwrap()), printed);
    }

    #[test]
    fn init_order_does_not_matter() {
        let a = parse_problem(
            "(define (problem p) (:domain d) (:objects b1 b2) (:init (clear b1) (on b1 b2) (on-table b2)) (:goal (and (on-table b1))))",
            None,
        )
        .unwrap();
        let b = parse_problem(
            "(define (problem p) (:domain d) (:objects b1 b2) (:init (on-table b2) (clear b1) (on b1 b2)) (:goal (on-table b1)))",
            None,
        )
        .unwrap();
        assert_eq!(print_problem(&a), print_problem(&b));
    }

    #[test]
    fn objects_are_lowercased() {
        let p = parse_problem(
            "(define (problem p) (:domain d) (:objects Block1) (:init (Clear Block1)) (:goal (and)))",
            None,
        )
        .unwrap();
        let text = print_problem(&p);
        assert!(text.contains("block1"));
        assert!(!text.contains("Block1"));
    }

    #[test]
    fn typed_objects_round_trip() {
        let p = parse_problem(
            "(define (problem p) (:domain d) (:objects a b - t1 c - t2) (:init) (:goal (and)))",
            None,
        )
        .unwrap();
        let printed = print_problem(&p);
        assert!(printed.contains("(:objects a b - t1 c - t2)"));
        assert_eq!(parse_problem(&printed, None).unwrap(), p);
    }
}
