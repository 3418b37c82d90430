//! Semantic BlocksWorld states.
//!
//! A [`BlocksState`] is a set of stacks (each listed top to bottom) plus an
//! optional held block. Conversion to and from the five-fluent atom
//! vocabulary (`on`, `on-table`, `clear`, `holding`, `arm-empty`) checks every
//! structural constraint and reports violations as [`StateDefect`] codes.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::{FromPrimitive, Num, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{Atom, AtomSet};

pub const ON: &str = "on";
pub const ON_TABLE: &str = "on-table";
pub const CLEAR: &str = "clear";
pub const HOLDING: &str = "holding";
pub const ARM_EMPTY: &str = "arm-empty";

/// Object name used for block `i` throughout generated problems.
pub fn block_name(i: usize) -> String {
    format!("block{i}")
}

/// `block1 ..= blockN`.
pub fn numbered_blocks(n: usize) -> Vec<String> {
    (1..=n).map(block_name).collect()
}

fn fluent_arity(predicate: &str) -> Option<usize> {
    match predicate {
        ON => Some(2),
        ON_TABLE | CLEAR | HOLDING => Some(1),
        ARM_EMPTY => Some(0),
        _ => None,
    }
}

/// Structural defect taxonomy for BlocksWorld atom sets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "code", content = "detail", rename_all = "snake_case")]
pub enum StateDefect {
    UnknownPredicate(Atom),
    WrongArity(Atom),
    DanglingObject(String),
    SelfRelation(String),
    NoSupport(String),
    MultipleSupports(String),
    MultipleOnTop(String),
    Cycle(Vec<String>),
    ClearOnCovered(String),
    MissingClear(String),
    ClearOnHeld(String),
    HeldBlockPlaced(String),
    StackedOnHeld(String),
    ArmConflict,
    NoArmFluent,
    MultipleHeld,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("block index {0} is outside the universe")]
    UnknownBlock(usize),
    #[error("block `{0}` appears more than once")]
    Repeated(String),
    #[error("block `{0}` is neither stacked nor held")]
    Missing(String),
    #[error("empty stack")]
    EmptyStack,
}

/// A complete BlocksWorld configuration over a fixed block universe.
///
/// Stacks are stored top to bottom and kept sorted by the universe index of
/// their top block, so two states with the same content compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlocksState {
    blocks: Vec<String>,
    stacks: Vec<Vec<usize>>,
    holding: Option<usize>,
}

impl BlocksState {
    pub fn new(
        blocks: Vec<String>,
        mut stacks: Vec<Vec<usize>>,
        holding: Option<usize>,
    ) -> Result<Self, StateError> {
        let mut seen = vec![false; blocks.len()];
        for &b in stacks.iter().flatten().chain(holding.iter()) {
            let slot = seen.get_mut(b).ok_or(StateError::UnknownBlock(b))?;
            if *slot {
                return Err(StateError::Repeated(blocks[b].clone()));
            }
            *slot = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(StateError::Missing(blocks[missing].clone()));
        }
        if stacks.iter().any(Vec::is_empty) {
            return Err(StateError::EmptyStack);
        }
        stacks.sort_by_key(|s| s[0]);
        Ok(BlocksState { blocks, stacks, holding })
    }

    /// Build a state over `block1..=blockN` from 1-based block numbers.
    pub fn numbered(n: usize, stacks: &[Vec<usize>], holding: Option<usize>) -> Result<Self, StateError> {
        let to_index = |b: usize| b.checked_sub(1).ok_or(StateError::UnknownBlock(b));
        let stacks = stacks
            .iter()
            .map(|s| s.iter().map(|&b| to_index(b)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let holding = holding.map(to_index).transpose()?;
        BlocksState::new(numbered_blocks(n), stacks, holding)
    }

    pub fn blocks(&self) -> &[String] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Stacks as universe indices, top to bottom.
    pub fn stacks(&self) -> &[Vec<usize>] {
        &self.stacks
    }

    pub fn holding(&self) -> Option<usize> {
        self.holding
    }

    pub fn name(&self, index: usize) -> &str {
        &self.blocks[index]
    }

    /// What each block rests on; held blocks report [`Support::Held`].
    pub fn supports(&self) -> Vec<Support> {
        let mut support = vec![Support::Held; self.blocks.len()];
        for stack in &self.stacks {
            for pair in stack.windows(2) {
                support[pair[0]] = Support::On(pair[1]);
            }
            support[*stack.last().expect("stacks are non-empty")] = Support::Table;
        }
        support
    }

    pub fn to_atoms(&self) -> AtomSet {
        state_to_atoms(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Support {
    Table,
    On(usize),
    Held,
}

/// Emit the closed-world atom set describing `state`.
pub fn state_to_atoms(state: &BlocksState) -> AtomSet {
    let mut atoms = AtomSet::new();
    for stack in &state.stacks {
        atoms.insert(Atom::new(CLEAR, [state.name(stack[0])]));
        for pair in stack.windows(2) {
            atoms.insert(Atom::new(ON, [state.name(pair[0]), state.name(pair[1])]));
        }
        atoms.insert(Atom::new(ON_TABLE, [state.name(*stack.last().expect("non-empty"))]));
    }
    match state.holding {
        Some(h) => atoms.insert(Atom::new(HOLDING, [state.name(h)])),
        None => atoms.insert(Atom::nullary(ARM_EMPTY)),
    };
    atoms
}

/// Per-block relations extracted from an atom set, before any constraint checking.
struct Relations {
    supports: Vec<Vec<Support>>,
    above: Vec<Vec<usize>>,
    clear: Vec<bool>,
    held: Vec<usize>,
    arm_empty: bool,
}

fn collect_relations(atoms: &AtomSet, universe: &[String], defects: &mut BTreeSet<StateDefect>) -> Relations {
    let index: BTreeMap<&str, usize> = universe.iter().enumerate().map(|(i, b)| (b.as_str(), i)).collect();
    let n = universe.len();
    let mut rel = Relations {
        supports: vec![Vec::new(); n],
        above: vec![Vec::new(); n],
        clear: vec![false; n],
        held: Vec::new(),
        arm_empty: false,
    };
    for atom in atoms {
        match fluent_arity(&atom.predicate) {
            None => {
                defects.insert(StateDefect::UnknownPredicate(atom.clone()));
                continue;
            }
            Some(arity) if arity != atom.arity() => {
                defects.insert(StateDefect::WrongArity(atom.clone()));
                continue;
            }
            _ => {}
        }
        let mut args = Vec::with_capacity(atom.arity());
        for arg in &atom.args {
            match index.get(arg.as_str()) {
                Some(&i) => args.push(i),
                None => {
                    defects.insert(StateDefect::DanglingObject(arg.clone()));
                }
            }
        }
        if args.len() != atom.arity() {
            continue;
        }
        match atom.predicate.as_str() {
            ON => {
                let (x, y) = (args[0], args[1]);
                if x == y {
                    defects.insert(StateDefect::SelfRelation(universe[x].clone()));
                    continue;
                }
                rel.supports[x].push(Support::On(y));
                rel.above[y].push(x);
            }
            ON_TABLE => rel.supports[args[0]].push(Support::Table),
            CLEAR => rel.clear[args[0]] = true,
            HOLDING => rel.held.push(args[0]),
            _ => rel.arm_empty = true,
        }
    }
    rel
}

/// Return the members of any cycle among unique `on` supports.
fn find_cycles(next: &[Option<usize>]) -> Vec<Vec<usize>> {
    let n = next.len();
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut mark = vec![0u8; n];
    let mut cycles = Vec::new();
    for start in 0..n {
        if mark[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(c) = cur {
            match mark[c] {
                0 => {
                    mark[c] = 1;
                    path.push(c);
                    cur = next[c];
                }
                1 => {
                    let pos = path.iter().position(|&p| p == c).expect("on path");
                    let mut cycle = path[pos..].to_vec();
                    cycle.sort_unstable();
                    cycles.push(cycle);
                    break;
                }
                _ => break,
            }
        }
        for p in path {
            mark[p] = 2;
        }
    }
    cycles
}

/// Reconstruct the stack configuration described by `init`.
///
/// All constraint violations are collected; the error carries every defect
/// found, sorted.
pub fn atoms_to_state(init: &AtomSet, universe: &[String]) -> Result<BlocksState, Vec<StateDefect>> {
    let mut defects = BTreeSet::new();
    let rel = collect_relations(init, universe, &mut defects);
    let name = |i: usize| universe[i].clone();

    let held: BTreeSet<usize> = rel.held.iter().copied().collect();
    if held.len() > 1 {
        defects.insert(StateDefect::MultipleHeld);
    }
    match (rel.arm_empty, held.is_empty()) {
        (true, false) => {
            defects.insert(StateDefect::ArmConflict);
        }
        (false, true) => {
            defects.insert(StateDefect::NoArmFluent);
        }
        _ => {}
    }

    let mut next = vec![None; universe.len()];
    for b in 0..universe.len() {
        let supports = &rel.supports[b];
        if held.contains(&b) {
            if !supports.is_empty() {
                defects.insert(StateDefect::HeldBlockPlaced(name(b)));
            }
            if rel.clear[b] {
                defects.insert(StateDefect::ClearOnHeld(name(b)));
            }
            if !rel.above[b].is_empty() {
                for &x in &rel.above[b] {
                    defects.insert(StateDefect::StackedOnHeld(name(x)));
                }
            }
            continue;
        }
        match supports.as_slice() {
            [] => {
                defects.insert(StateDefect::NoSupport(name(b)));
            }
            [Support::On(y)] => next[b] = Some(*y),
            [_] => {}
            _ => {
                defects.insert(StateDefect::MultipleSupports(name(b)));
            }
        }
        match (rel.above[b].len(), rel.clear[b]) {
            (0, false) => {
                defects.insert(StateDefect::MissingClear(name(b)));
            }
            (0, true) => {}
            (count, clear) => {
                if count > 1 {
                    defects.insert(StateDefect::MultipleOnTop(name(b)));
                }
                if clear {
                    defects.insert(StateDefect::ClearOnCovered(name(b)));
                }
            }
        }
    }
    for cycle in find_cycles(&next) {
        defects.insert(StateDefect::Cycle(cycle.into_iter().map(name).collect()));
    }
    if !defects.is_empty() {
        return Err(defects.into_iter().collect());
    }

    let mut stacks = Vec::new();
    for top in 0..universe.len() {
        if held.contains(&top) || !rel.above[top].is_empty() {
            continue;
        }
        let mut stack = vec![top];
        let mut cur = top;
        while let Some(below) = next[cur] {
            stack.push(below);
            cur = below;
        }
        stacks.push(stack);
    }
    Ok(BlocksState::new(universe.to_vec(), stacks, held.into_iter().next())
        .expect("defect-free atoms describe a complete state"))
}

/// A (possibly partial) goal over a block universe, checked for consistency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalSpec {
    pub blocks: Vec<String>,
    /// Required support per block; `None` means unconstrained.
    pub support: Vec<Option<Support>>,
    pub clear: Vec<bool>,
    pub arm_empty: bool,
    pub holding: Option<usize>,
}

impl GoalSpec {
    pub fn from_atoms(goal: &AtomSet, universe: &[String]) -> Result<GoalSpec, Vec<StateDefect>> {
        let mut defects = BTreeSet::new();
        let rel = collect_relations(goal, universe, &mut defects);
        let name = |i: usize| universe[i].clone();
        let held: BTreeSet<usize> = rel.held.iter().copied().collect();
        if held.len() > 1 {
            defects.insert(StateDefect::MultipleHeld);
        }
        if rel.arm_empty && !held.is_empty() {
            defects.insert(StateDefect::ArmConflict);
        }
        let mut support = vec![None; universe.len()];
        let mut next = vec![None; universe.len()];
        for b in 0..universe.len() {
            match rel.supports[b].as_slice() {
                [] => {}
                [s] => {
                    support[b] = Some(*s);
                    if let Support::On(y) = s {
                        next[b] = Some(*y);
                    }
                }
                _ => {
                    defects.insert(StateDefect::MultipleSupports(name(b)));
                }
            }
            if held.contains(&b) && !rel.supports[b].is_empty() {
                defects.insert(StateDefect::HeldBlockPlaced(name(b)));
            }
            if rel.above[b].len() > 1 {
                defects.insert(StateDefect::MultipleOnTop(name(b)));
            }
            if rel.clear[b] && !rel.above[b].is_empty() {
                defects.insert(StateDefect::ClearOnCovered(name(b)));
            }
            if held.contains(&b) {
                if rel.clear[b] {
                    defects.insert(StateDefect::ClearOnHeld(name(b)));
                }
                for &x in &rel.above[b] {
                    defects.insert(StateDefect::StackedOnHeld(name(x)));
                }
            }
        }
        for cycle in find_cycles(&next) {
            defects.insert(StateDefect::Cycle(cycle.into_iter().map(name).collect()));
        }
        if !defects.is_empty() {
            return Err(defects.into_iter().collect());
        }
        Ok(GoalSpec {
            blocks: universe.to_vec(),
            support,
            clear: rel.clear,
            arm_empty: rel.arm_empty,
            holding: held.into_iter().next(),
        })
    }

    pub fn is_satisfied_by(&self, state: &BlocksState) -> bool {
        let supports = state.supports();
        let mut covered = vec![false; state.len()];
        for stack in state.stacks() {
            for &b in &stack[1..] {
                covered[b] = true;
            }
        }
        self.support.iter().zip(&supports).all(|(want, have)| want.is_none_or(|w| w == *have))
            && self
                .clear
                .iter()
                .enumerate()
                .all(|(b, &c)| !c || (!covered[b] && state.holding() != Some(b)))
            && (!self.arm_empty || state.holding().is_none())
            && self.holding.is_none_or(|h| state.holding() == Some(h))
    }
}

/// Number of arrangements of `n` labeled blocks into stacks with the arm
/// empty, evaluated in any numeric type.
///
/// Uses `a(n) = (2n-1)·a(n-1) - (n-1)(n-2)·a(n-2)` with `a(0) = a(1) = 1`.
pub fn arrangements<T>(n: usize) -> T
where
    T: Num + Clone + FromPrimitive,
{
    let lift = |k: usize| T::from_usize(k).expect("small integers are representable");
    let (mut prev, mut cur) = (T::one(), T::one());
    for k in 2..=n {
        let next = lift(2 * k - 1) * cur.clone() - lift((k - 1) * (k - 2)) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Exact state-space size together with its decimal magnitude.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpaceSize {
    pub n: usize,
    pub arm_empty: BigUint,
    /// Includes the `n · a(n-1)` states where one block is held.
    pub with_holding: BigUint,
}

impl StateSpaceSize {
    pub fn log10(&self) -> f64 {
        log10_big(&self.arm_empty)
    }

    pub fn log10_with_holding(&self) -> f64 {
        log10_big(&self.with_holding)
    }
}

pub fn count_states(n: usize) -> StateSpaceSize {
    let arm_empty: BigUint = arrangements(n);
    let held = if n == 0 { BigUint::from(0u8) } else { arrangements::<BigUint>(n - 1) * BigUint::from(n) };
    StateSpaceSize { n, with_holding: &arm_empty + held, arm_empty }
}

/// Decimal logarithm of an arbitrarily large integer.
pub fn log10_big(value: &BigUint) -> f64 {
    if let Some(f) = value.to_f64().filter(|f| f.is_finite()) {
        return f.log10();
    }
    let digits = value.to_str_radix(10);
    let lead: f64 = digits[..17].parse().expect("decimal digits");
    lead.log10() + (digits.len() - 17) as f64
}
