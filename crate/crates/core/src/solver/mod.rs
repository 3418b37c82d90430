//! In-house BlocksWorld planners and an adapter for external planner binaries.
//!
//! All plans use the action names of the shipped domain:
//! `pickup`, `putdown`, `stack`, `unstack`.

mod bfs;
mod external;
mod heuristic;

use serde::Serialize;
use thiserror::Error;

pub use bfs::solve_optimal_bfs;
pub use external::{solve_external, ExternalError, ExternalPlanner};
pub use heuristic::solve_heuristic;

use crate::blocks::{atoms_to_state, BlocksState, GoalSpec, StateDefect};
use crate::pddl::ProblemModel;
use crate::validate::GroundAction;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum SolveError {
    #[error("initial state is not a well-formed BlocksWorld state: {0:?}")]
    IllFormedInit(Vec<StateDefect>),
    #[error("goal is inconsistent: {0:?}")]
    IllFormedGoal(Vec<StateDefect>),
    #[error("goals on the held block are not supported")]
    UnsupportedGoal,
    #[error("search budget of {budget} states exhausted")]
    BudgetExhausted { budget: usize },
}

/// Declared objects in order, without repeats.
pub(crate) fn universe(problem: &ProblemModel) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    problem
        .objects
        .iter()
        .filter(|o| seen.insert(o.name.as_str()))
        .map(|o| o.name.clone())
        .collect()
}

pub(crate) fn load(problem: &ProblemModel) -> Result<(BlocksState, GoalSpec), SolveError> {
    let blocks = universe(problem);
    let init = atoms_to_state(&problem.init, &blocks).map_err(SolveError::IllFormedInit)?;
    let goal = GoalSpec::from_atoms(&problem.goal, &blocks).map_err(SolveError::IllFormedGoal)?;
    Ok((init, goal))
}

pub(crate) fn pickup(b: &str) -> GroundAction {
    GroundAction::new("pickup", [b])
}

pub(crate) fn putdown(b: &str) -> GroundAction {
    GroundAction::new("putdown", [b])
}

pub(crate) fn stack(b: &str, under: &str) -> GroundAction {
    GroundAction::new("stack", [b, under])
}

pub(crate) fn unstack(b: &str, under: &str) -> GroundAction {
    GroundAction::new("unstack", [b, under])
}
