//! Fixed-text fixtures: rendered descriptions must match them byte for byte.

use std::collections::BTreeSet;

use planform::blocks::{atoms_to_state, numbered_blocks, BlocksState, ARM_EMPTY, CLEAR, ON, ON_TABLE};
use planform::dataset::{read_clause, segment, unravel_from_goal, xxl_from_states, Section};
use planform::pddl::{parse_problem, print_problem, Atom, AtomSet};
use planform::assets::blocksworld_domain;

const XXL_5: &str = include_str!("fixtures/xxl_5.nl");
const XXL_5_PDDL: &str = include_str!("fixtures/xxl_5.pddl");
const UNRAVEL_100: &str = include_str!("fixtures/unravel_100.nl");

fn five_block_states() -> (BlocksState, BlocksState) {
    let init = BlocksState::numbered(5, &[vec![1, 3, 5, 4, 2]], None).unwrap();
    let goal = BlocksState::numbered(5, &[vec![1], vec![2], vec![3], vec![4], vec![5]], None).unwrap();
    (init, goal)
}

#[test]
fn five_block_description_matches_fixture() {
    let (init, goal) = five_block_states();
    let inst = xxl_from_states("p001", 0, &init, &goal);
    assert_eq!(inst.nl_description, XXL_5);
    assert_eq!(inst.ground_truth.init.len(), 7);
    assert_eq!(inst.ground_truth.goal.len(), 5);
    let fixture = parse_problem(XXL_5_PDDL, Some(&blocksworld_domain())).unwrap();
    assert_eq!(inst.ground_truth, fixture);
}

#[test]
fn five_block_fixture_round_trips_through_printer() {
    let p = parse_problem(XXL_5_PDDL, None).unwrap();
    assert_eq!(print_problem(&p), XXL_5_PDDL);
}

/// Rebuild a goal configuration from its `on` / `on-table` atoms.
fn goal_state(n: usize, goal: &AtomSet) -> BlocksState {
    let covered: BTreeSet<&str> =
        goal.iter().filter(|a| a.predicate == ON).map(|a| a.args[1].as_str()).collect();
    let mut atoms = goal.clone();
    for b in numbered_blocks(n) {
        if !covered.contains(b.as_str()) {
            atoms.insert(Atom::new(CLEAR, [b]));
        }
    }
    atoms.insert(Atom::nullary(ARM_EMPTY));
    atoms_to_state(&atoms, &numbered_blocks(n)).expect("fixture goal is a full configuration")
}

#[test]
fn hundred_block_unravel_matches_fixture() {
    let clauses = segment(UNRAVEL_100);
    let init_clauses: Vec<_> = clauses.iter().filter(|c| c.section == Section::Init).collect();
    assert_eq!(init_clauses.len(), 2);
    let goal: AtomSet = clauses
        .iter()
        .filter(|c| c.section == Section::Goal)
        .flat_map(|c| read_clause(&c.text, 100).expect("goal clause follows the template"))
        .collect();
    assert_eq!(goal.len(), 100);

    let inst = unravel_from_goal("p001", 0, &goal_state(100, &goal));
    assert_eq!(inst.nl_description, UNRAVEL_100);
    let init = &inst.ground_truth.init;
    assert_eq!(init.len(), 103);
    let count = |p: &str| init.iter().filter(|a| a.predicate == p).count();
    assert_eq!((count(ON), count(ON_TABLE), count(CLEAR), count(ARM_EMPTY)), (98, 2, 2, 1));
    assert_eq!(inst.ground_truth.goal, goal);
}

#[test]
fn init_clauses_read_back_in_order() {
    let clauses = segment(XXL_5);
    assert_eq!(clauses.len(), 12);
    let first: Vec<Atom> = clauses.iter().take(3).flat_map(|c| read_clause(&c.text, 5).unwrap()).collect();
    assert_eq!(
        first,
        vec![Atom::new(CLEAR, ["block1"]), Atom::nullary(ARM_EMPTY), Atom::new(ON, ["block1", "block3"])]
    );
}
