use super::{load, pickup, putdown, stack, unstack, SolveError};
use crate::blocks::Support;
use crate::pddl::ProblemModel;
use crate::validate::Plan;

/// Unstack-then-build planner, linear in the number of blocks.
///
/// Blocks without a goal support are sent to the table. A block counts as
/// well placed when it sits on its goal support and everything beneath it is
/// well placed too; those blocks are never moved. Phase one clears every
/// badly placed block off its stack onto the table, phase two builds the goal
/// towers bottom-up. At most two actions per block per phase, so the plan
/// has at most `4n` steps.
pub fn solve_heuristic(problem: &ProblemModel) -> Result<Plan, SolveError> {
    let (state, goal) = load(problem)?;
    if goal.holding.is_some() {
        return Err(SolveError::UnsupportedGoal);
    }
    let n = state.len();
    let name = |b: usize| state.name(b).to_string();
    let target: Vec<Support> = goal.support.iter().map(|s| s.unwrap_or(Support::Table)).collect();
    let mut steps = Vec::new();

    let mut current = state.supports();
    if let Some(h) = state.holding() {
        steps.push(putdown(&name(h)));
        current[h] = Support::Table;
    }

    let well = well_placed(&current, &target);

    let mut stacks: Vec<Vec<usize>> = state.stacks().to_vec();
    if let Some(h) = state.holding() {
        stacks.push(vec![h]);
    }
    for stack_blocks in &stacks {
        for pair in stack_blocks.windows(2) {
            let (top, below) = (pair[0], pair[1]);
            if well[top] {
                break;
            }
            steps.push(unstack(&name(top), &name(below)));
            steps.push(putdown(&name(top)));
        }
    }

    let mut depth = vec![0usize; n];
    for b in 0..n {
        let mut d = 0;
        let mut cur = b;
        while let Support::On(below) = target[cur] {
            d += 1;
            cur = below;
        }
        depth[b] = d;
    }
    let mut order: Vec<usize> = (0..n).filter(|&b| !well[b]).collect();
    order.sort_by_key(|&b| (depth[b], b));
    for b in order {
        if let Support::On(under) = target[b] {
            steps.push(pickup(&name(b)));
            steps.push(stack(&name(b), &name(under)));
        }
    }
    Ok(Plan { steps })
}

/// `well[b]` holds when `b` and every block beneath it rest on their goal supports.
fn well_placed(current: &[Support], target: &[Support]) -> Vec<bool> {
    let mut memo: Vec<Option<bool>> = vec![None; current.len()];
    for start in 0..current.len() {
        let mut chain = Vec::new();
        let mut cur = start;
        let mut below_ok = loop {
            if let Some(known) = memo[cur] {
                break known;
            }
            chain.push(cur);
            match current[cur] {
                Support::On(below) => cur = below,
                _ => break true,
            }
        };
        for &b in chain.iter().rev() {
            below_ok = below_ok && current[b] == target[b];
            memo[b] = Some(below_ok);
        }
    }
    memo.into_iter().map(|m| m.unwrap_or(false)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::blocksworld_domain;
    use crate::blocks::{state_to_atoms, BlocksState};
    use crate::pddl::{Atom, AtomSet, Object, ProblemModel};
    use crate::validate::{parse_plan, validate};

    fn problem(init: &BlocksState, goal: AtomSet) -> ProblemModel {
        ProblemModel {
            problem_name: "t".into(),
            domain_name: "blocksworld".into(),
            objects: init.blocks().iter().map(|b| Object { name: b.clone(), type_tag: None }).collect(),
            init: state_to_atoms(init),
            goal,
        }
    }

    fn support_goal(goal: &BlocksState) -> AtomSet {
        state_to_atoms(goal).into_iter().filter(|a| a.predicate == "on" || a.predicate == "on-table").collect()
    }

    #[test]
    fn five_block_tower_gives_the_eight_step_plan() {
        let init = BlocksState::numbered(5, &[vec![1, 3, 5, 4, 2]], None).unwrap();
        let goal = BlocksState::numbered(5, &[vec![1], vec![2], vec![3], vec![4], vec![5]], None).unwrap();
        let plan = solve_heuristic(&problem(&init, support_goal(&goal))).unwrap();
        let expected = parse_plan(
            "(unstack block1 block3)\n(putdown block1)\n(unstack block3 block5)\n(putdown block3)\n\
             (unstack block5 block4)\n(putdown block5)\n(unstack block4 block2)\n(putdown block4)",
        )
        .unwrap();
        assert_eq!(plan, expected);
    }

    #[test]
    fn satisfied_goal_gives_empty_plan() {
        let init = BlocksState::numbered(4, &[vec![1, 2], vec![3, 4]], None).unwrap();
        assert!(solve_heuristic(&problem(&init, support_goal(&init))).unwrap().is_empty());
    }

    #[test]
    fn well_placed_bases_are_kept() {
        // 3 sits correctly on 4; only 1 and 2 need moving
        let init = BlocksState::numbered(4, &[vec![1, 2, 3, 4]], None).unwrap();
        let goal = BlocksState::numbered(4, &[vec![2, 1, 3, 4]], None).unwrap();
        let p = problem(&init, support_goal(&goal));
        let plan = solve_heuristic(&p).unwrap();
        assert_eq!(plan.len(), 8);
        assert!(validate(&blocksworld_domain(), &p, &plan).valid);
    }

    #[test]
    fn initial_holding_is_put_down_first() {
        let init = BlocksState::numbered(3, &[vec![1, 2]], Some(3)).unwrap();
        let goal = BlocksState::numbered(3, &[vec![2, 3, 1]], None).unwrap();
        let p = problem(&init, support_goal(&goal));
        let plan = solve_heuristic(&p).unwrap();
        assert_eq!(plan.steps[0].name, "putdown");
        assert!(validate(&blocksworld_domain(), &p, &plan).valid);
        assert!(plan.len() <= 12);
    }

    #[test]
    fn partial_goals_are_completed() {
        let init = BlocksState::numbered(3, &[vec![1, 2, 3]], None).unwrap();
        let p = problem(&init, [Atom::new("on", ["block3", "block1"]), Atom::new("clear", ["block2"])].into());
        let plan = solve_heuristic(&p).unwrap();
        assert!(validate(&blocksworld_domain(), &p, &plan).valid);
    }

    #[test]
    fn inconsistent_goal_is_an_error() {
        let init = BlocksState::numbered(2, &[vec![1], vec![2]], None).unwrap();
        let p = problem(&init, [Atom::new("on", ["block1", "block2"]), Atom::new("on", ["block2", "block1"])].into());
        assert!(matches!(solve_heuristic(&p), Err(SolveError::IllFormedGoal(_))));
        let mut bad = problem(&init, AtomSet::new());
        bad.init.remove(&Atom::nullary("arm-empty"));
        assert!(matches!(solve_heuristic(&bad), Err(SolveError::IllFormedInit(_))));
    }
}
