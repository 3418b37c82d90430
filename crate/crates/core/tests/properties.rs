use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use planform::assets::blocksworld_domain;
use planform::blocks::{atoms_to_state, state_to_atoms, GoalSpec};
use planform::dataset::{generate, random_state, read_clause, Family, Section};
use planform::equivalence::{classify, diff_problems, random_mutation, MutationClass};
use planform::pddl::{parse_problem, print_problem, AtomSet};
use planform::solver::{solve_heuristic, solve_optimal_bfs};
use planform::validate::validate;

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Xxl), Just(Family::Unravel)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_then_parse_is_identity(family in family(), n in 2usize..=40, seed: u64) {
        let inst = generate(family, n, seed);
        let text = print_problem(&inst.ground_truth);
        let back = parse_problem(&text, Some(&blocksworld_domain())).unwrap();
        prop_assert_eq!(&back, &inst.ground_truth);
        prop_assert_eq!(print_problem(&back), text);
    }

    #[test]
    fn atom_order_does_not_matter(n in 2usize..=20, seed: u64, shuffle: u64) {
        use rand::seq::SliceRandom;
        let truth = generate(Family::Xxl, n, seed).ground_truth;
        let mut init: Vec<String> = truth.init.iter().map(ToString::to_string).collect();
        let mut goal: Vec<String> = truth.goal.iter().map(ToString::to_string).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        init.shuffle(&mut rng);
        goal.shuffle(&mut rng);
        let objects: Vec<&str> = truth.object_names();
        let text = format!(
            "(define (problem {}) (:domain blocksworld) (:objects {}) (:init {}) (:goal (and {})))",
            truth.problem_name, objects.join(" "), init.join(" "), goal.join(" ")
        );
        let candidate = parse_problem(&text, None).unwrap();
        prop_assert!(diff_problems(&candidate, &truth).matches);
    }

    #[test]
    fn atoms_and_states_round_trip(n in 1usize..=100, seed: u64) {
        let state = random_state(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let atoms = state_to_atoms(&state);
        prop_assert_eq!(atoms.len(), n + state.stacks().len() + 1);
        let back = atoms_to_state(&atoms, state.blocks()).unwrap();
        prop_assert_eq!(back, state);
    }

    #[test]
    fn heuristic_plans_validate_within_four_n(family in family(), n in 2usize..=60, seed: u64) {
        let inst = generate(family, n, seed);
        let plan = solve_heuristic(&inst.ground_truth).unwrap();
        prop_assert!(plan.len() <= 4 * n);
        let verdict = validate(&blocksworld_domain(), &inst.ground_truth, &plan);
        prop_assert!(verdict.valid, "{:?}", verdict.failure_reason);
        let universe: Vec<String> = inst.ground_truth.object_names().iter().map(|s| s.to_string()).collect();
        let goal = GoalSpec::from_atoms(&inst.ground_truth.goal, &universe).unwrap();
        prop_assert!(goal.is_satisfied_by(&atoms_to_state(&verdict.final_state, &universe).unwrap()));
    }

    #[test]
    fn mutations_are_classified_exactly(n in 2usize..=30, seed: u64, pick in 0usize..4) {
        let truth = generate(Family::Xxl, n, seed).ground_truth;
        let class = MutationClass::ALL[pick];
        let m = random_mutation(&truth, class, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let report = diff_problems(&m.apply(&truth), &truth);
        prop_assert!(!report.matches);
        prop_assert_eq!(classify(&report), class.expected_flags());
        prop_assert_eq!(m.inverse().apply(&m.apply(&truth)), truth);
    }

    #[test]
    fn clauses_read_back_to_ground_truth(family in family(), n in 2usize..=40, seed: u64) {
        let inst = generate(family, n, seed);
        let (mut init, mut goal) = (AtomSet::new(), AtomSet::new());
        for clause in inst.clauses() {
            let atoms = read_clause(&clause.text, n).unwrap();
            match clause.section {
                Section::Init => init.extend(atoms),
                Section::Goal => goal.extend(atoms),
            }
        }
        prop_assert_eq!(init, inst.ground_truth.init);
        prop_assert_eq!(goal, inst.ground_truth.goal);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bfs_is_never_longer_than_heuristic(n in 1usize..=5, seed: u64) {
        let inst = generate(Family::Xxl, n, seed);
        let heuristic = solve_heuristic(&inst.ground_truth).unwrap();
        let optimal = solve_optimal_bfs(&inst.ground_truth, 1_000_000).unwrap();
        prop_assert!(validate(&blocksworld_domain(), &inst.ground_truth, &optimal).valid);
        prop_assert!(optimal.len() <= heuristic.len());
    }
}
