use std::collections::HashMap;
use std::fmt::Write as _;

use super::backend::{Backend, BackendError, CallKind, Completion, CompletionRequest};
use crate::blocks::{Support, ON, ON_TABLE};
use crate::dataset::{read_clause, Family, ProblemInstance};
use crate::pddl::{print_problem, ProblemModel};
use crate::solver::{solve_heuristic, universe};

/// Answers every call correctly from the ground truth of known instances.
pub struct OracleBackend {
    instances: HashMap<String, ProblemInstance>,
}

impl OracleBackend {
    pub fn new<I: IntoIterator<Item = ProblemInstance>>(instances: I) -> Self {
        OracleBackend { instances: instances.into_iter().map(|i| (i.id.clone(), i)).collect() }
    }

    fn answer(&self, kind: CallKind, inst: &ProblemInstance, clause: Option<usize>) -> Result<String, BackendError> {
        let other = |message: String| BackendError::Other { message };
        let truth = &inst.ground_truth;
        Ok(match kind {
            CallKind::Planner => {
                let plan = solve_heuristic(truth).map_err(|e| other(e.to_string()))?;
                format!("<plan>\n{plan}</plan>")
            }
            CallKind::Formalizer => format!("<problem_file>\n{}</problem_file>", print_problem(truth)),
            CallKind::Header => format!("<header>\n{}</header>", header_text(truth)),
            CallKind::Fact => {
                let index = clause.ok_or_else(|| other("fact call without clause index".into()))?;
                let clauses = inst.clauses();
                let text = &clauses.get(index).ok_or_else(|| other(format!("no clause {index}")))?.text;
                let atoms = read_clause(text, inst.n).ok_or_else(|| other(format!("unreadable clause `{text}`")))?;
                let body: Vec<String> = atoms.iter().map(ToString::to_string).collect();
                format!("<fact>\n{}\n</fact>", body.join(" "))
            }
            CallKind::Generator => format!("<generator>\n{}</generator>", generator_program(inst)),
        })
    }
}

impl Backend for OracleBackend {
    fn id(&self) -> String {
        "mock-oracle".into()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        let inst = self
            .instances
            .get(&request.meta.instance_id)
            .ok_or_else(|| BackendError::Other { message: format!("unknown instance `{}`", request.meta.instance_id) })?;
        self.answer(request.meta.kind, inst, request.meta.clause).map(Completion::text)
    }
}

/// `(define (problem ..) (:domain ..) (:objects ..))` for `problem`.
pub fn header_text(problem: &ProblemModel) -> String {
    format!(
        "(define\n  (problem {})\n  (:domain {})\n  (:objects {})\n)\n",
        problem.problem_name,
        problem.domain_name,
        problem.object_names().join(" ")
    )
}

/// Stacks (top to bottom, 1-based) described by the support atoms of `atoms`.
fn stacks_of(problem: &ProblemModel, goal: bool) -> Vec<Vec<usize>> {
    let blocks = universe(problem);
    let index: HashMap<&str, usize> = blocks.iter().enumerate().map(|(i, b)| (b.as_str(), i)).collect();
    let atoms = if goal { &problem.goal } else { &problem.init };
    let mut support = vec![None; blocks.len()];
    for atom in atoms {
        match (atom.predicate.as_str(), atom.args.as_slice()) {
            (p, [x, y]) if p == ON => support[index[x.as_str()]] = Some(Support::On(index[y.as_str()])),
            (p, [x]) if p == ON_TABLE => support[index[x.as_str()]] = Some(Support::Table),
            _ => {}
        }
    }
    let mut covered = vec![false; blocks.len()];
    for s in support.iter().flatten() {
        if let Support::On(u) = s {
            covered[*u] = true;
        }
    }
    let mut stacks = Vec::new();
    for top in (0..blocks.len()).filter(|&b| !covered[b] && support[b].is_some()) {
        let mut stack = vec![top + 1];
        let mut cur = top;
        while let Some(Support::On(u)) = support[cur] {
            stack.push(u + 1);
            cur = u;
        }
        stacks.push(stack);
    }
    stacks
}

fn py_list(stacks: &[Vec<usize>]) -> String {
    let inner: Vec<String> =
        stacks.iter().map(|s| format!("[{}]", s.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))).collect();
    format!("[{}]", inner.join(", "))
}

/// A program that rebuilds the instance's problem file from its stacks.
pub fn generator_program(inst: &ProblemInstance) -> String {
    let truth = &inst.ground_truth;
    let init_stacks = match inst.family {
        Family::Unravel => "[list(range(1, n + 1, 2)), list(range(2, n + 1, 2))]".to_string(),
        Family::Xxl => py_list(&stacks_of(truth, false)),
    };
    let mut program = String::new();
    let _ = write!(
        program,
        r#"def emit_stack(stack, facts, with_clear):
    for idx, b in enumerate(stack):
        if idx == len(stack) - 1:
            facts.append(f"(on-table block{{b}})")
        else:
            facts.append(f"(on block{{b}} block{{stack[idx + 1]}})")
        if with_clear and idx == 0:
            facts.append(f"(clear block{{b}})")


def main():
    n = {n}
    blocks = [f"block{{i}}" for i in range(1, n + 1)]
    init_stacks = {init_stacks}
    goal_stacks = {goal_stacks}
    init = []
    for stack in init_stacks:
        emit_stack(stack, init, True)
    init.append("(arm-empty)")
    goal = []
    for stack in goal_stacks:
        emit_stack(stack, goal, False)
    lines = ["(define (problem {name})", "  (:domain {domain})", "  (:objects " + " ".join(blocks) + ")", "  (:init"]
    lines += ["    " + f for f in init]
    lines += ["  )", "  (:goal (and"]
    lines += ["    " + f for f in goal]
    lines += ["  ))", ")"]
    with open("problem.pddl", "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
"#,
        n = inst.n,
        goal_stacks = py_list(&stacks_of(truth, true)),
        name = truth.problem_name,
        domain = truth.domain_name,
    );
    program
}
