//! Seeded BlocksWorld problem generation.
//!
//! Two families are produced. XXL instances draw both the initial and goal
//! configuration at random and describe each fact in its own clause. Unravel
//! instances always start from the odd/even two-stack arrangement, described
//! in a fixed-length summary, with a random goal spelled out block by block.
//!
//! A suite directory holds `domain.pddl`, `domain.nl`, one `pNNN.nl` and
//! `pNNN.pddl` per instance and a `manifest.json`. Every byte of it is a
//! function of the suite spec, so regenerating with the same seed reproduces
//! the tree exactly.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets;
use crate::blocks::{block_name, numbered_blocks, state_to_atoms, BlocksState, Support, ARM_EMPTY, CLEAR, HOLDING, ON, ON_TABLE};
use crate::pddl::{parse_problem, print_problem, Atom, AtomSet, Object, PddlError, ProblemModel};
use crate::Ratio;

pub const INIT_LEAD: &str = "As initial conditions I have that, ";
pub const GOAL_LEAD: &str = "My goal is to have that ";
const UNRAVEL_LEAD: &str = "As initial conditions I have ";

/// Block counts used by the default suites.
pub const DEFAULT_SIZES: [usize; 5] = [5, 30, 50, 75, 100];
/// Instances per block count in the default suites.
pub const DEFAULT_PER_SIZE: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Xxl,
    Unravel,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Xxl => "xxl",
            Family::Unravel => "unravel",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xxl" => Ok(Family::Xxl),
            "unravel" => Ok(Family::Unravel),
            other => Err(format!("unknown family `{other}` (expected xxl or unravel)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Init,
    Goal,
}

/// One segment of a description, tagged with the section it describes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub section: Section,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub id: String,
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    pub nl_description: String,
    pub ground_truth: ProblemModel,
}

impl ProblemInstance {
    pub fn pddl_text(&self) -> String {
        print_problem(&self.ground_truth)
    }

    pub fn clauses(&self) -> Vec<Clause> {
        segment(&self.nl_description)
    }

    pub fn init_clause_count(&self) -> usize {
        self.clauses().iter().filter(|c| c.section == Section::Init).count()
    }

    pub fn goal_clause_count(&self) -> usize {
        self.clauses().iter().filter(|c| c.section == Section::Goal).count()
    }

    /// PDDL init and goal lines per description clause.
    pub fn compression_ratio(&self) -> Ratio {
        let atoms = self.ground_truth.init.len() + self.ground_truth.goal.len();
        Ratio::new(atoms as u64, self.clauses().len().max(1) as u64)
    }

    /// Init lines per init clause; constant-description families grow linearly here.
    pub fn init_compression_ratio(&self) -> Ratio {
        Ratio::new(self.ground_truth.init.len() as u64, self.init_clause_count().max(1) as u64)
    }

    fn with_id(mut self, id: String) -> Self {
        self.ground_truth.problem_name = id.clone();
        self.id = id;
        self
    }
}

/// A random configuration with the arm empty: blocks are inserted in random
/// order, each onto a uniformly chosen existing stack top or a fresh stack.
pub fn random_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BlocksState {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut piles: Vec<Vec<usize>> = Vec::new();
    for b in order {
        let k = rng.gen_range(0..=piles.len());
        match piles.get_mut(k) {
            Some(pile) => pile.push(b),
            None => piles.push(vec![b]),
        }
    }
    for pile in &mut piles {
        pile.reverse();
    }
    BlocksState::new(numbered_blocks(n), piles, None).expect("every block inserted once")
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-instance seed derived from the suite seed and the instance's identity.
pub fn instance_seed(suite_seed: u64, family: Family, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in family.as_str().bytes().chain(*b"/").chain(id.bytes()) {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(suite_seed ^ splitmix64(h))
}

/// `block12` renders as `block 12`; other names are used verbatim.
fn spoken(name: &str) -> String {
    match name.strip_prefix("block") {
        Some(num) if !num.is_empty() && num.bytes().all(|b| b.is_ascii_digit()) => format!("block {num}"),
        _ => name.to_string(),
    }
}

fn join_items(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [only] => only.clone(),
        [rest @ .., last] => format!("{}, and {last}", rest.join(", ")),
    }
}

fn support_items(state: &BlocksState) -> (Vec<String>, Vec<String>) {
    let mut on = Vec::new();
    let mut table = Vec::new();
    for (b, support) in state.supports().into_iter().enumerate() {
        match support {
            Support::On(u) => {
                on.push(format!("{} is on top of {}", spoken(state.name(b)), spoken(state.name(u))))
            }
            Support::Table => table.push(format!("{} is on the table", spoken(state.name(b)))),
            Support::Held => {}
        }
    }
    (on, table)
}

/// Init clauses in template order: clear, hand, on, on-table.
pub fn describe_init(state: &BlocksState) -> Vec<String> {
    let mut tops: Vec<usize> = state.stacks().iter().map(|s| s[0]).collect();
    tops.sort_unstable();
    let mut items: Vec<String> = tops.iter().map(|&b| format!("{} is clear", spoken(state.name(b)))).collect();
    items.push(match state.holding() {
        Some(h) => format!("the hand is holding {}", spoken(state.name(h))),
        None => "the hand is empty".to_string(),
    });
    let (on, table) = support_items(state);
    items.extend(on);
    items.extend(table);
    items
}

/// Goal clauses: on facts by upper block, then on-table facts.
pub fn describe_goal(state: &BlocksState) -> Vec<String> {
    let (mut on, table) = support_items(state);
    on.extend(table);
    on
}

pub fn init_sentence(state: &BlocksState) -> String {
    format!("{INIT_LEAD}{}.", join_items(&describe_init(state)))
}

pub fn goal_sentence(state: &BlocksState) -> String {
    format!("{GOAL_LEAD}{}.", join_items(&describe_goal(state)))
}

pub fn unravel_init_sentence(n: usize) -> String {
    format!(
        "{UNRAVEL_LEAD}{n} blocks numbered 1 to {n}. All the odd numbered blocks are on one stack, with increasing \
         numbering from top to bottom. Same for the even numbered blocks on another stack."
    )
}

/// The odd/even two-stack arrangement, both stacks increasing top to bottom.
pub fn odd_even_state(n: usize) -> BlocksState {
    let odds: Vec<usize> = (1..=n).step_by(2).collect();
    let evens: Vec<usize> = (2..=n).step_by(2).collect();
    let stacks: Vec<Vec<usize>> = [odds, evens].into_iter().filter(|s| !s.is_empty()).collect();
    BlocksState::numbered(n, &stacks, None).expect("odd/even split covers every block")
}

fn goal_atoms(goal: &BlocksState) -> AtomSet {
    state_to_atoms(goal).into_iter().filter(|a| a.predicate == ON || a.predicate == ON_TABLE).collect()
}

fn model(id: &str, init: &BlocksState, goal: &BlocksState) -> ProblemModel {
    ProblemModel {
        problem_name: id.to_string(),
        domain_name: "blocksworld".into(),
        objects: init.blocks().iter().map(|b| Object { name: b.clone(), type_tag: None }).collect(),
        init: state_to_atoms(init),
        goal: goal_atoms(goal),
    }
}

/// An XXL instance over fixed configurations.
pub fn xxl_from_states(id: &str, seed: u64, init: &BlocksState, goal: &BlocksState) -> ProblemInstance {
    ProblemInstance {
        id: id.to_string(),
        family: Family::Xxl,
        n: init.len(),
        seed,
        nl_description: format!("{}\n{}\n", init_sentence(init), goal_sentence(goal)),
        ground_truth: model(id, init, goal),
    }
}

/// An Unravel instance with a fixed goal configuration.
pub fn unravel_from_goal(id: &str, seed: u64, goal: &BlocksState) -> ProblemInstance {
    let n = goal.len();
    let init = odd_even_state(n);
    ProblemInstance {
        id: id.to_string(),
        family: Family::Unravel,
        n,
        seed,
        nl_description: format!("{}\n{}\n", unravel_init_sentence(n), goal_sentence(goal)),
        ground_truth: model(id, &init, goal),
    }
}

/// # Panics
/// If `n == 0`.
pub fn gen_xxl(n: usize, seed: u64) -> ProblemInstance {
    assert!(n >= 1, "XXL instances need at least one block");
    let mut rng = rng_for(seed);
    let init = random_state(n, &mut rng);
    let goal = random_state(n, &mut rng);
    xxl_from_states(&format!("xxl-{n}-{seed:016x}"), seed, &init, &goal)
}

/// # Panics
/// If `n < 2`.
pub fn gen_unravel(n: usize, seed: u64) -> ProblemInstance {
    assert!(n >= 2, "Unravel instances need at least two blocks");
    let goal = random_state(n, &mut rng_for(seed));
    unravel_from_goal(&format!("unravel-{n}-{seed:016x}"), seed, &goal)
}

pub fn generate(family: Family, n: usize, seed: u64) -> ProblemInstance {
    match family {
        Family::Xxl => gen_xxl(n, seed),
        Family::Unravel => gen_unravel(n, seed),
    }
}

fn strip_and(item: &str) -> &str {
    item.strip_prefix("and ").unwrap_or(item)
}

fn split_items(body: &str) -> Vec<String> {
    let body = body.trim().trim_end_matches('.');
    body.split(", ").map(|s| strip_and(s.trim()).to_string()).filter(|s| !s.is_empty()).collect()
}

/// Split a description into clauses.
///
/// Comma-joined sentences yield one clause per item, with lead-ins and the
/// closing period removed. The Unravel summary yields two clauses: the count
/// and odd stack together, then the even stack.
pub fn segment(description: &str) -> Vec<Clause> {
    let mut clauses = Vec::new();
    for line in description.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let push_all = |clauses: &mut Vec<Clause>, section, body: &str| {
            clauses.extend(split_items(body).into_iter().map(|text| Clause { section, text }));
        };
        if let Some(body) = line.strip_prefix(INIT_LEAD) {
            push_all(&mut clauses, Section::Init, body);
        } else if let Some(body) = line.strip_prefix(GOAL_LEAD) {
            push_all(&mut clauses, Section::Goal, body);
        } else if line.starts_with(UNRAVEL_LEAD) {
            let sentences: Vec<&str> = line.split_inclusive(". ").map(str::trim).collect();
            let split = sentences.len().min(2);
            let (head, tail) = sentences.split_at(split);
            clauses.push(Clause { section: Section::Init, text: head.join(" ") });
            if !tail.is_empty() {
                clauses.push(Clause { section: Section::Init, text: tail.join(" ") });
            }
        } else {
            let section = if clauses.iter().any(|c| c.section == Section::Goal) { Section::Goal } else { Section::Init };
            clauses.push(Clause { section, text: line.to_string() });
        }
    }
    clauses
}

struct Patterns {
    clear: Regex,
    hand_empty: Regex,
    holding: Regex,
    on: Regex,
    table: Regex,
    odd: Regex,
    even: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| {
        let re = |s: &str| Regex::new(s).expect("static pattern");
        Patterns {
            clear: re(r"^block (\d+) is clear$"),
            hand_empty: re(r"^the hand is empty$"),
            holding: re(r"^the hand is holding block (\d+)$"),
            on: re(r"^block (\d+) is on top of block (\d+)$"),
            table: re(r"^block (\d+) is on the table$"),
            odd: re(r"^As initial conditions I have (\d+) blocks numbered 1 to (\d+)\. All the odd numbered blocks are on one stack, with increasing numbering from top to bottom\.$"),
            even: re(r"^Same for the even numbered blocks on another stack\.$"),
        }
    })
}

fn stack_atoms(stack: &[usize]) -> Vec<Atom> {
    let mut atoms = Vec::new();
    if let (Some(&top), Some(&base)) = (stack.first(), stack.last()) {
        atoms.push(Atom::new(CLEAR, [block_name(top)]));
        atoms.extend(stack.windows(2).map(|p| Atom::new(ON, [block_name(p[0]), block_name(p[1])])));
        atoms.push(Atom::new(ON_TABLE, [block_name(base)]));
    }
    atoms
}

/// The atoms a template clause stands for, or `None` for text the templates
/// never produce. `n` is the block count, needed by the even-stack clause.
pub fn read_clause(text: &str, n: usize) -> Option<Vec<Atom>> {
    let p = patterns();
    let text = text.trim();
    let num = |c: &regex::Captures, i: usize| c[i].parse::<usize>().ok().map(block_name);
    if let Some(c) = p.clear.captures(text) {
        return Some(vec![Atom::new(CLEAR, [num(&c, 1)?])]);
    }
    if p.hand_empty.is_match(text) {
        return Some(vec![Atom::nullary(ARM_EMPTY)]);
    }
    if let Some(c) = p.holding.captures(text) {
        return Some(vec![Atom::new(HOLDING, [num(&c, 1)?])]);
    }
    if let Some(c) = p.on.captures(text) {
        return Some(vec![Atom::new(ON, [num(&c, 1)?, num(&c, 2)?])]);
    }
    if let Some(c) = p.table.captures(text) {
        return Some(vec![Atom::new(ON_TABLE, [num(&c, 1)?])]);
    }
    if let Some(c) = p.odd.captures(text) {
        let n: usize = c[1].parse().ok()?;
        let odds: Vec<usize> = (1..=n).step_by(2).collect();
        let mut atoms = stack_atoms(&odds);
        atoms.push(Atom::nullary(ARM_EMPTY));
        return Some(atoms);
    }
    if p.even.is_match(text) {
        let evens: Vec<usize> = (2..=n).step_by(2).collect();
        return Some(stack_atoms(&evens));
    }
    None
}

/// Instances per block count for one family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub family: Family,
    pub seed: u64,
    /// `(n, count)` pairs, generated in this order.
    pub buckets: Vec<(usize, usize)>,
}

impl SuiteSpec {
    pub fn new(family: Family, seed: u64, buckets: Vec<(usize, usize)>) -> Self {
        SuiteSpec { family, seed, buckets }
    }

    /// Five block counts from 5 to 100, 40 instances each.
    pub fn standard(family: Family, seed: u64) -> Self {
        SuiteSpec::new(family, seed, DEFAULT_SIZES.iter().map(|&n| (n, DEFAULT_PER_SIZE)).collect())
    }

    pub fn total(&self) -> usize {
        self.buckets.iter().map(|&(_, c)| c).sum()
    }

    fn check(&self) -> Result<(), DatasetError> {
        let min_n = match self.family {
            Family::Xxl => 1,
            Family::Unravel => 2,
        };
        for &(n, count) in &self.buckets {
            if count == 0 {
                return Err(DatasetError::InvalidSpec(format!("bucket n={n} has count 0")));
            }
            if n < min_n {
                return Err(DatasetError::InvalidSpec(format!("{} needs n >= {min_n}, got {n}", self.family)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid suite spec: {0}")]
    InvalidSpec(String),
    #[error("duplicate instance id `{0}`")]
    DuplicateId(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("instance {id}: {source}")]
    Pddl { id: String, source: PddlError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Instances of a suite in bucket order, ids `p001`, `p002`, ...
pub fn build_suite(spec: &SuiteSpec) -> Result<Vec<ProblemInstance>, DatasetError> {
    spec.check()?;
    let width = spec.total().to_string().len().max(3);
    let mut instances = Vec::with_capacity(spec.total());
    for &(n, count) in &spec.buckets {
        for _ in 0..count {
            let id = format!("p{:0width$}", instances.len() + 1);
            let seed = instance_seed(spec.seed, spec.family, &id);
            instances.push(generate(spec.family, n, seed).with_id(id));
        }
    }
    Ok(instances)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    /// Exact value as `numerator/denominator`.
    pub compression_ratio: String,
    pub compression_ratio_value: f64,
    pub init_clauses: usize,
    pub goal_clauses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub family: Family,
    pub seed: Option<u64>,
    pub instances: Vec<ManifestEntry>,
}

fn entry(instance: &ProblemInstance) -> ManifestEntry {
    let ratio = instance.compression_ratio();
    ManifestEntry {
        id: instance.id.clone(),
        family: instance.family,
        n: instance.n,
        seed: instance.seed,
        compression_ratio: format!("{}/{}", ratio.numer(), ratio.denom()),
        compression_ratio_value: *ratio.numer() as f64 / *ratio.denom() as f64,
        init_clauses: instance.init_clause_count(),
        goal_clauses: instance.goal_clause_count(),
    }
}

/// Write instances and the shared domain files under `dir`.
pub fn write_suite(dir: &Path, family: Family, seed: Option<u64>, instances: &[ProblemInstance]) -> Result<Manifest, DatasetError> {
    let mut ids = BTreeSet::new();
    for inst in instances {
        if !ids.insert(inst.id.as_str()) {
            return Err(DatasetError::DuplicateId(inst.id.clone()));
        }
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(io_err(&path))
    };
    write("domain.pddl", assets::DOMAIN_PDDL)?;
    write("domain.nl", assets::DOMAIN_NL)?;
    for inst in instances {
        write(&format!("{}.nl", inst.id), &inst.nl_description)?;
        write(&format!("{}.pddl", inst.id), &inst.pddl_text())?;
    }
    let manifest = Manifest { family, seed, instances: instances.iter().map(entry).collect() };
    write("manifest.json", &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(manifest)
}

pub fn gen_suite(dir: &Path, spec: &SuiteSpec) -> Result<Manifest, DatasetError> {
    let instances = build_suite(spec)?;
    write_suite(dir, spec.family, Some(spec.seed), &instances)
}

/// A suite read back from disk.
#[derive(Debug, Clone)]
pub struct Suite {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub instances: Vec<ProblemInstance>,
}

pub fn load_suite(dir: &Path) -> Result<Suite, DatasetError> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let domain = assets::blocksworld_domain();
    let mut instances = Vec::with_capacity(manifest.instances.len());
    for e in &manifest.instances {
        let read = |ext: &str| {
            let path = dir.join(format!("{}.{ext}", e.id));
            std::fs::read_to_string(&path).map_err(io_err(&path))
        };
        let nl_description = read("nl")?;
        let ground_truth = parse_problem(&read("pddl")?, Some(&domain))
            .map_err(|source| DatasetError::Pddl { id: e.id.clone(), source })?;
        instances.push(ProblemInstance { id: e.id.clone(), family: e.family, n: e.n, seed: e.seed, nl_description, ground_truth });
    }
    Ok(Suite { dir: dir.to_path_buf(), manifest, instances })
}
