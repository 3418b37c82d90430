//! Strict comparison of a candidate problem file against ground truth.
//!
//! Two problems match when their init and goal atom sets are equal, their
//! object sets are equal with no duplicates or undeclared references, and the
//! candidate describes a well-formed BlocksWorld state. Nothing is inferred:
//! a candidate that leaves out a derivable `clear` fact does not match.

use std::collections::BTreeSet;

use rand::seq::IteratorRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blocks::{atoms_to_state, GoalSpec, StateDefect, ARM_EMPTY, CLEAR, ON, ON_TABLE};
use crate::dataset::Section;
use crate::pddl::{Atom, AtomSet, ProblemDefect, ProblemModel};
use crate::solver::universe;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "object", rename_all = "snake_case")]
pub enum ObjectDefect {
    Undeclared(String),
    Duplicate(String),
    /// Declared in the ground truth only.
    Missing(String),
    /// Declared in the candidate only.
    Extra(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StructuralDefect {
    pub section: Section,
    pub defect: StateDefect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    #[serde(rename = "match")]
    pub matches: bool,
    pub missing_init: Vec<Atom>,
    pub extra_init: Vec<Atom>,
    pub missing_goal: Vec<Atom>,
    pub extra_goal: Vec<Atom>,
    pub object_defects: Vec<ObjectDefect>,
    pub structural_defects: Vec<StructuralDefect>,
}

/// The four error categories; several may hold at once.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErrorFlags {
    pub missing_init: bool,
    pub extra_init: bool,
    pub missing_goal: bool,
    pub extra_goal: bool,
}

impl ErrorFlags {
    pub fn any(&self) -> bool {
        self.missing_init || self.extra_init || self.missing_goal || self.extra_goal
    }

    pub fn as_array(&self) -> [bool; 4] {
        [self.missing_init, self.extra_init, self.missing_goal, self.extra_goal]
    }
}

fn difference(a: &AtomSet, b: &AtomSet) -> Vec<Atom> {
    a.difference(b).cloned().collect()
}

fn section_of(atom: &Atom, problem: &ProblemModel) -> Section {
    if problem.init.contains(atom) {
        Section::Init
    } else {
        Section::Goal
    }
}

pub fn diff_problems(candidate: &ProblemModel, truth: &ProblemModel) -> DiffReport {
    let mut object_defects = BTreeSet::new();
    for defect in candidate.defects() {
        match defect {
            ProblemDefect::DuplicateObject(o) => object_defects.insert(ObjectDefect::Duplicate(o)),
            ProblemDefect::UndeclaredObject(o) => object_defects.insert(ObjectDefect::Undeclared(o)),
            ProblemDefect::SelfRelation(_) => false,
        };
    }
    let cand_objects: BTreeSet<&str> = candidate.object_names().into_iter().collect();
    let truth_objects: BTreeSet<&str> = truth.object_names().into_iter().collect();
    object_defects.extend(truth_objects.difference(&cand_objects).map(|o| ObjectDefect::Missing(o.to_string())));
    object_defects.extend(cand_objects.difference(&truth_objects).map(|o| ObjectDefect::Extra(o.to_string())));

    let blocks = universe(candidate);
    let mut structural = BTreeSet::new();
    if let Err(defects) = atoms_to_state(&candidate.init, &blocks) {
        structural.extend(defects.into_iter().map(|defect| StructuralDefect { section: Section::Init, defect }));
    }
    if let Err(defects) = GoalSpec::from_atoms(&candidate.goal, &blocks) {
        structural.extend(defects.into_iter().map(|defect| StructuralDefect { section: Section::Goal, defect }));
    }
    for defect in candidate.defects() {
        if let ProblemDefect::SelfRelation(atom) = defect {
            let section = section_of(&atom, candidate);
            structural.insert(StructuralDefect { section, defect: StateDefect::SelfRelation(atom.args[0].clone()) });
        }
    }

    let mut report = DiffReport {
        matches: false,
        missing_init: difference(&truth.init, &candidate.init),
        extra_init: difference(&candidate.init, &truth.init),
        missing_goal: difference(&truth.goal, &candidate.goal),
        extra_goal: difference(&candidate.goal, &truth.goal),
        object_defects: object_defects.into_iter().collect(),
        structural_defects: structural.into_iter().collect(),
    };
    report.matches = report.missing_init.is_empty()
        && report.extra_init.is_empty()
        && report.missing_goal.is_empty()
        && report.extra_goal.is_empty()
        && report.object_defects.is_empty()
        && report.structural_defects.is_empty();
    report
}

pub fn classify(report: &DiffReport) -> ErrorFlags {
    ErrorFlags {
        missing_init: !report.missing_init.is_empty(),
        extra_init: !report.extra_init.is_empty(),
        missing_goal: !report.missing_goal.is_empty(),
        extra_goal: !report.extra_goal.is_empty(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationClass {
    DropInit,
    AddInit,
    DropGoal,
    AddGoal,
}

impl MutationClass {
    pub const ALL: [MutationClass; 4] =
        [MutationClass::DropInit, MutationClass::AddInit, MutationClass::DropGoal, MutationClass::AddGoal];

    /// The single flag this corruption should raise.
    pub fn expected_flags(self) -> ErrorFlags {
        let mut f = ErrorFlags::default();
        match self {
            MutationClass::DropInit => f.missing_init = true,
            MutationClass::AddInit => f.extra_init = true,
            MutationClass::DropGoal => f.missing_goal = true,
            MutationClass::AddGoal => f.extra_goal = true,
        }
        f
    }
}

/// One atom removed from or inserted into one section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mutation {
    pub class: MutationClass,
    pub atom: Atom,
}

impl Mutation {
    pub fn apply(&self, problem: &ProblemModel) -> ProblemModel {
        let mut out = problem.clone();
        match self.class {
            MutationClass::DropInit => out.init.remove(&self.atom),
            MutationClass::AddInit => out.init.insert(self.atom.clone()),
            MutationClass::DropGoal => out.goal.remove(&self.atom),
            MutationClass::AddGoal => out.goal.insert(self.atom.clone()),
        };
        out
    }

    pub fn inverse(&self) -> Mutation {
        let class = match self.class {
            MutationClass::DropInit => MutationClass::AddInit,
            MutationClass::AddInit => MutationClass::DropInit,
            MutationClass::DropGoal => MutationClass::AddGoal,
            MutationClass::AddGoal => MutationClass::DropGoal,
        };
        Mutation { class, atom: self.atom.clone() }
    }
}

fn fresh_atom<R: Rng + ?Sized>(objects: &[&str], taken: &AtomSet, rng: &mut R) -> Option<Atom> {
    let mut candidates: Vec<Atom> = Vec::new();
    for &a in objects {
        candidates.push(Atom::new(CLEAR, [a]));
        candidates.push(Atom::new(ON_TABLE, [a]));
        for &b in objects {
            if a != b {
                candidates.push(Atom::new(ON, [a, b]));
            }
        }
    }
    candidates.push(Atom::nullary(ARM_EMPTY));
    candidates.into_iter().filter(|c| !taken.contains(c)).choose(rng)
}

/// A random corruption of `class`, or `None` when the section offers nothing
/// to drop or add.
pub fn random_mutation<R: Rng + ?Sized>(problem: &ProblemModel, class: MutationClass, rng: &mut R) -> Option<Mutation> {
    let objects = problem.object_names();
    let atom = match class {
        MutationClass::DropInit => problem.init.iter().choose(rng).cloned(),
        MutationClass::DropGoal => problem.goal.iter().choose(rng).cloned(),
        MutationClass::AddInit => fresh_atom(&objects, &problem.init, rng),
        MutationClass::AddGoal => fresh_atom(&objects, &problem.goal, rng),
    }?;
    Some(Mutation { class, atom })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::gen_xxl;
    use rand::SeedableRng;

    #[test]
    fn identity_matches() {
        let truth = gen_xxl(10, 4).ground_truth;
        let report = diff_problems(&truth, &truth);
        assert!(report.matches, "{report:?}");
        assert_eq!(classify(&report), ErrorFlags::default());
    }

    #[test]
    fn one_missing_and_one_extra_init() {
        let truth = gen_xxl(6, 2).ground_truth;
        let mut cand = truth.clone();
        let dropped = cand.init.iter().find(|a| a.predicate == ON_TABLE).unwrap().clone();
        cand.init.remove(&dropped);
        cand.init.insert(Atom::new(ON, ["block1", "block1"]));
        let report = diff_problems(&cand, &truth);
        assert_eq!(report.missing_init, vec![dropped]);
        assert_eq!(classify(&report).as_array(), [true, true, false, false]);
        assert!(report
            .structural_defects
            .contains(&StructuralDefect { section: Section::Init, defect: StateDefect::SelfRelation("block1".into()) }));
    }

    #[test]
    fn object_differences_are_defects() {
        let truth = gen_xxl(3, 2).ground_truth;
        let mut cand = truth.clone();
        cand.objects.pop();
        cand.objects.push(cand.objects[0].clone());
        let report = diff_problems(&cand, &truth);
        assert!(!report.matches);
        assert!(report.object_defects.contains(&ObjectDefect::Missing("block3".into())));
        assert!(report.object_defects.contains(&ObjectDefect::Duplicate("block1".into())));
        assert!(report.object_defects.contains(&ObjectDefect::Undeclared("block3".into())));
    }

    #[test]
    fn type_tags_are_ignored() {
        let truth = gen_xxl(4, 8).ground_truth;
        let mut cand = truth.clone();
        for o in &mut cand.objects {
            o.type_tag = Some("block".into());
        }
        assert!(diff_problems(&cand, &truth).matches);
    }

    #[test]
    fn mutations_invert() {
        let truth = gen_xxl(8, 1).ground_truth;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for class in MutationClass::ALL {
            let m = random_mutation(&truth, class, &mut rng).unwrap();
            let mutated = m.apply(&truth);
            assert_ne!(mutated, truth);
            assert_eq!(m.inverse().apply(&mutated), truth);
        }
    }
}
