use std::collections::{HashMap, VecDeque};

use super::{load, pickup, putdown, stack, unstack, SolveError};
use crate::blocks::{BlocksState, GoalSpec, Support};
use crate::pddl::ProblemModel;
use crate::validate::{GroundAction, Plan};

const TABLE: u16 = u16::MAX;
const HAND: u16 = u16::MAX - 1;

/// `below[b]` is the block under `b`, or `TABLE` / `HAND`.
type Key = Vec<u16>;

fn encode(state: &BlocksState) -> Key {
    state
        .supports()
        .into_iter()
        .map(|s| match s {
            Support::Table => TABLE,
            Support::Held => HAND,
            Support::On(b) => b as u16,
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Move {
    Pickup(u16),
    Putdown(u16),
    Stack(u16, u16),
    Unstack(u16, u16),
}

fn successors(key: &Key, out: &mut Vec<(Move, Key)>) {
    out.clear();
    let n = key.len();
    let mut covered = vec![false; n];
    let mut held = None;
    for (b, &s) in key.iter().enumerate() {
        match s {
            HAND => held = Some(b),
            TABLE => {}
            under => covered[under as usize] = true,
        }
    }
    match held {
        Some(h) => {
            let mut next = key.clone();
            next[h] = TABLE;
            out.push((Move::Putdown(h as u16), next));
            for t in 0..n {
                if t != h && !covered[t] {
                    let mut next = key.clone();
                    next[h] = t as u16;
                    out.push((Move::Stack(h as u16, t as u16), next));
                }
            }
        }
        None => {
            for b in 0..n {
                if covered[b] {
                    continue;
                }
                let mut next = key.clone();
                next[b] = HAND;
                let mv = match key[b] {
                    TABLE => Move::Pickup(b as u16),
                    under => Move::Unstack(b as u16, under),
                };
                out.push((mv, next));
            }
        }
    }
}

fn satisfied(goal: &GoalSpec, key: &Key) -> bool {
    let mut covered = vec![false; key.len()];
    let mut held = None;
    for (b, &s) in key.iter().enumerate() {
        match s {
            HAND => held = Some(b),
            TABLE => {}
            under => covered[under as usize] = true,
        }
    }
    goal.support.iter().zip(key).all(|(want, &have)| match want {
        None => true,
        Some(Support::Table) => have == TABLE,
        Some(Support::Held) => have == HAND,
        Some(Support::On(u)) => have == *u as u16,
    }) && goal.clear.iter().enumerate().all(|(b, &c)| !c || (!covered[b] && held != Some(b)))
        && (!goal.arm_empty || held.is_none())
        && goal.holding.is_none_or(|h| held == Some(h))
}

/// Breadth-first search over configurations, deduplicated on the support
/// encoding. Returns a shortest plan, or `BudgetExhausted` once more than
/// `state_budget` distinct states have been discovered.
pub fn solve_optimal_bfs(problem: &ProblemModel, state_budget: usize) -> Result<Plan, SolveError> {
    let (state, goal) = load(problem)?;
    let start = encode(&state);
    let mut parent: HashMap<Key, Option<(Key, Move)>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start]);
    let mut buffer = Vec::new();
    while let Some(key) = queue.pop_front() {
        if satisfied(&goal, &key) {
            return Ok(reconstruct(&parent, key, &state));
        }
        successors(&key, &mut buffer);
        for (mv, next) in buffer.drain(..) {
            if parent.contains_key(&next) {
                continue;
            }
            if parent.len() >= state_budget {
                return Err(SolveError::BudgetExhausted { budget: state_budget });
            }
            parent.insert(next.clone(), Some((key.clone(), mv)));
            queue.push_back(next);
        }
    }
    // every configuration is reachable, so only an unsatisfiable goal ends here
    Err(SolveError::BudgetExhausted { budget: state_budget })
}

fn reconstruct(parent: &HashMap<Key, Option<(Key, Move)>>, mut key: Key, state: &BlocksState) -> Plan {
    let name = |b: u16| state.name(b as usize);
    let mut steps: Vec<GroundAction> = Vec::new();
    while let Some(Some((prev, mv))) = parent.get(&key) {
        steps.push(match *mv {
            Move::Pickup(b) => pickup(name(b)),
            Move::Putdown(b) => putdown(name(b)),
            Move::Stack(b, u) => stack(name(b), name(u)),
            Move::Unstack(b, u) => unstack(name(b), name(u)),
        });
        key = prev.clone();
    }
    steps.reverse();
    Plan { steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::blocksworld_domain;
    use crate::blocks::state_to_atoms;
    use crate::pddl::{AtomSet, Object};
    use crate::solver::solve_heuristic;
    use crate::validate::validate;

    fn problem(init: &BlocksState, goal: &BlocksState) -> ProblemModel {
        let goal: AtomSet = state_to_atoms(goal)
            .into_iter()
            .filter(|a| a.predicate == "on" || a.predicate == "on-table")
            .collect();
        ProblemModel {
            problem_name: "t".into(),
            domain_name: "blocksworld".into(),
            objects: init.blocks().iter().map(|b| Object { name: b.clone(), type_tag: None }).collect(),
            init: state_to_atoms(init),
            goal,
        }
    }

    /// Shortest plan length found by trying every action sequence of growing
    /// length through the plan validator, with no deduplication.
    fn brute_force_min(p: &ProblemModel, max_len: usize) -> Option<usize> {
        let domain = blocksworld_domain();
        let blocks: Vec<String> = p.objects.iter().map(|o| o.name.clone()).collect();
        let mut actions = Vec::new();
        for a in &blocks {
            actions.push(GroundAction::new("pickup", [a]));
            actions.push(GroundAction::new("putdown", [a]));
            for b in &blocks {
                if a != b {
                    actions.push(GroundAction::new("stack", [a, b]));
                    actions.push(GroundAction::new("unstack", [a, b]));
                }
            }
        }
        fn go(
            domain: &crate::pddl::DomainModel,
            p: &ProblemModel,
            actions: &[GroundAction],
            prefix: &mut Vec<GroundAction>,
            remaining: usize,
        ) -> bool {
            let verdict = validate(domain, p, &Plan { steps: prefix.clone() });
            if verdict.valid {
                return true;
            }
            if verdict.failure_step.is_some() || remaining == 0 {
                return false;
            }
            for a in actions {
                prefix.push(a.clone());
                if go(domain, p, actions, prefix, remaining - 1) {
                    return true;
                }
                prefix.pop();
            }
            false
        }
        (0..=max_len).find(|&len| go(&domain, p, &actions, &mut Vec::new(), len))
    }

    #[test]
    fn reversing_three_blocks_matches_brute_force() {
        let init = BlocksState::numbered(3, &[vec![1, 2, 3]], None).unwrap();
        let goal = BlocksState::numbered(3, &[vec![3, 2, 1]], None).unwrap();
        let p = problem(&init, &goal);
        let plan = solve_optimal_bfs(&p, 10_000).unwrap();
        assert!(validate(&blocksworld_domain(), &p, &plan).valid);
        assert_eq!(Some(plan.len()), brute_force_min(&p, 8));
    }

    #[test]
    fn five_block_tower_shortest_is_eight() {
        let init = BlocksState::numbered(5, &[vec![1, 3, 5, 4, 2]], None).unwrap();
        let goal = BlocksState::numbered(5, &[vec![1], vec![2], vec![3], vec![4], vec![5]], None).unwrap();
        let p = problem(&init, &goal);
        let plan = solve_optimal_bfs(&p, 100_000).unwrap();
        assert_eq!(plan.len(), 8);
        assert_eq!(solve_heuristic(&p).unwrap().len(), 8);
    }

    #[test]
    fn identity_goal_is_empty() {
        let init = BlocksState::numbered(3, &[vec![1, 2], vec![3]], None).unwrap();
        assert!(solve_optimal_bfs(&problem(&init, &init), 10).unwrap().is_empty());
    }

    #[test]
    fn tiny_budget_is_exhausted() {
        let init = BlocksState::numbered(4, &[vec![1, 2, 3, 4]], None).unwrap();
        let goal = BlocksState::numbered(4, &[vec![4, 3, 2, 1]], None).unwrap();
        assert_eq!(
            solve_optimal_bfs(&problem(&init, &goal), 5),
            Err(SolveError::BudgetExhausted { budget: 5 })
        );
    }
}
