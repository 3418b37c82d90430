//! Plan text parsing and STRIPS plan simulation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{Atom, AtomSet, DomainModel, ProblemModel};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
}

impl GroundAction {
    pub fn new<I, S>(name: &str, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        GroundAction {
            name: name.to_lowercase(),
            args: args.into_iter().map(|a| a.as_ref().to_lowercase()).collect(),
        }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<GroundAction>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            writeln!(f, "{step}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: malformed plan step `{text}`")]
pub struct PlanParseError {
    pub line: usize,
    pub text: String,
}

/// Parse one action per line, `(name arg ...)`.
///
/// Blank lines and `;` comments are skipped. Anything else on a line,
/// such as step numbers or timestamps, is rejected.
pub fn parse_plan(text: &str) -> Result<Plan, PlanParseError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let malformed = || PlanParseError { line: i + 1, text: raw.trim().to_string() };
        let inner = line
            .strip_prefix('(')
            .and_then(|l| l.strip_suffix(')'))
            .ok_or_else(malformed)?;
        if inner.contains(['(', ')']) {
            return Err(malformed());
        }
        let mut words = inner.split_whitespace();
        let name = words.next().ok_or_else(malformed)?;
        steps.push(GroundAction::new(name, words));
    }
    Ok(Plan { steps })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    UnknownAction { name: String },
    ArityMismatch { action: String, expected: usize, found: usize },
    PreconditionUnsatisfied { atom: Atom },
    GoalUnmet { atoms: Vec<Atom> },
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::UnknownAction { name } => write!(f, "unknown action `{name}`"),
            FailureReason::ArityMismatch { action, expected, found } => {
                write!(f, "`{action}` expects {expected} argument(s), got {found}")
            }
            FailureReason::PreconditionUnsatisfied { atom } => write!(f, "precondition {atom} unsatisfied"),
            FailureReason::GoalUnmet { atoms } => {
                let list: Vec<String> = atoms.iter().map(Atom::to_string).collect();
                write!(f, "goal unmet: {}", list.join(" "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub valid: bool,
    pub failure_step: Option<usize>,
    pub failure_reason: Option<FailureReason>,
    pub final_state: AtomSet,
}

/// Simulate `plan` from the problem's initial state under closed-world STRIPS
/// semantics. Deletes are applied before adds; the goal is checked once, after
/// the last step.
pub fn validate(domain: &DomainModel, problem: &ProblemModel, plan: &Plan) -> Verdict {
    let mut state = problem.init.clone();
    let fail = |step: Option<usize>, reason: FailureReason, state: AtomSet| Verdict {
        valid: false,
        failure_step: step,
        failure_reason: Some(reason),
        final_state: state,
    };
    for (i, step) in plan.steps.iter().enumerate() {
        let Some(schema) = domain.action(&step.name) else {
            return fail(Some(i), FailureReason::UnknownAction { name: step.name.clone() }, state);
        };
        if schema.params.len() != step.args.len() {
            let reason = FailureReason::ArityMismatch {
                action: step.name.clone(),
                expected: schema.params.len(),
                found: step.args.len(),
            };
            return fail(Some(i), reason, state);
        }
        let binding: BTreeMap<&str, &str> =
            schema.params.iter().map(String::as_str).zip(step.args.iter().map(String::as_str)).collect();
        if let Some(missing) = schema.preconditions.iter().map(|p| p.ground(&binding)).find(|p| !state.contains(p)) {
            return fail(Some(i), FailureReason::PreconditionUnsatisfied { atom: missing }, state);
        }
        for atom in &schema.del_effects {
            state.remove(&atom.ground(&binding));
        }
        for atom in &schema.add_effects {
            state.insert(atom.ground(&binding));
        }
    }
    let unmet: Vec<Atom> = problem.goal.difference(&state).cloned().collect();
    if !unmet.is_empty() {
        return fail(None, FailureReason::GoalUnmet { atoms: unmet }, state);
    }
    Verdict { valid: true, failure_step: None, failure_reason: None, final_state: state }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::blocksworld_domain;
    use crate::pddl::{parse_domain, parse_problem};

    const FIVE_BLOCKS: &str = "(define (problem p) (:domain blocksworld)
        (:objects block1 block2 block3 block4 block5)
        (:init (clear block1) (arm-empty) (on block1 block3) (on block3 block5)
               (on block4 block2) (on block5 block4) (on-table block2))
        (:goal (and (on-table block1) (on-table block2) (on-table block3) (on-table block4) (on-table block5))))";

    const EIGHT_STEPS: &str = "(unstack block1 block3)\n(putdown block1)\n(unstack block3 block5)\n(putdown block3)\n\
        (unstack block5 block4)\n(putdown block5)\n(unstack block4 block2)\n(putdown block4)\n";

    #[test]
    fn parses_simple_plans() {
        assert_eq!(parse_plan("(pickup b1)\n\n(putdown b1)").unwrap().len(), 2);
        let example = "(pick-up block1 hand)\n(stack block1 block2)\n(move robot room1 room2)\n";
        let plan = parse_plan(example).unwrap();
        assert_eq!(plan.len(), 3);
        assert_eq!(plan.steps[0], GroundAction::new("pick-up", ["block1", "hand"]));
    }

    #[test]
    fn numbered_steps_are_rejected() {
        assert_eq!(
            parse_plan("(pickup b1)\n1: (pickup b1)"),
            Err(PlanParseError { line: 2, text: "1: (pickup b1)".into() })
        );
        assert!(parse_plan("(pickup b1) (putdown b1)").is_err());
        assert!(parse_plan("()").is_err());
    }

    #[test]
    fn eight_step_plan_validates() {
        let d = blocksworld_domain();
        let p = parse_problem(FIVE_BLOCKS, Some(&d)).unwrap();
        let v = validate(&d, &p, &parse_plan(EIGHT_STEPS).unwrap());
        assert!(v.valid, "{v:?}");
        assert!(p.goal.is_subset(&v.final_state));
    }

    #[test]
    fn covered_pickup_fails_at_step_zero() {
        let d = blocksworld_domain();
        let p = parse_problem(FIVE_BLOCKS, Some(&d)).unwrap();
        let v = validate(&d, &p, &parse_plan("(pickup block3)").unwrap());
        assert!(!v.valid);
        assert_eq!(v.failure_step, Some(0));
        assert_eq!(
            v.failure_reason,
            Some(FailureReason::PreconditionUnsatisfied { atom: Atom::new("clear", ["block3"]) })
        );
    }

    #[test]
    fn empty_plan_on_satisfied_goal() {
        let d = blocksworld_domain();
        let p = parse_problem(
            "(define (problem p) (:domain blocksworld) (:objects b1) (:init (on-table b1) (clear b1) (arm-empty)) (:goal (on-table b1)))",
            Some(&d),
        )
        .unwrap();
        assert!(validate(&d, &p, &Plan::default()).valid);
    }

    #[test]
    fn unknown_action_arity_and_goal_failures() {
        let d = blocksworld_domain();
        let p = parse_problem(FIVE_BLOCKS, Some(&d)).unwrap();
        let v = validate(&d, &p, &parse_plan("(pick-up block1 hand)").unwrap());
        assert_eq!(v.failure_reason, Some(FailureReason::UnknownAction { name: "pick-up".into() }));
        let v = validate(&d, &p, &parse_plan("(unstack block1)").unwrap());
        assert!(matches!(v.failure_reason, Some(FailureReason::ArityMismatch { expected: 2, found: 1, .. })));
        let v = validate(&d, &p, &Plan::default());
        assert_eq!(v.failure_step, None);
        match v.failure_reason {
            Some(FailureReason::GoalUnmet { atoms }) => assert_eq!(atoms.len(), 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn delete_then_add_keeps_atom() {
        let d = parse_domain(
            "(define (domain toggle) (:predicates (p ?x) (q ?x))
             (:action flip :parameters (?x) :precondition (p ?x) :effect (and (not (p ?x)) (p ?x) (q ?x))))",
        )
        .unwrap();
        let p = parse_problem("(define (problem t) (:domain toggle) (:objects a) (:init (p a)) (:goal (and (p a) (q a))))", Some(&d))
            .unwrap();
        let v = validate(&d, &p, &parse_plan("(flip a)").unwrap());
        assert!(v.valid);
        assert!(v.final_state.contains(&Atom::new("p", ["a"])));
    }

    #[test]
    fn validation_is_deterministic() {
        let d = blocksworld_domain();
        let p = parse_problem(FIVE_BLOCKS, Some(&d)).unwrap();
        let plan = parse_plan(EIGHT_STEPS).unwrap();
        assert_eq!(validate(&d, &p, &plan), validate(&d, &p, &plan));
    }
}
