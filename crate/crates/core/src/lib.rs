//! Harness for studying LLM planners and formalizers on BlocksWorld.
//!
//! The crate covers the whole loop: a STRIPS PDDL parser and printer
//! ([`pddl`]), the BlocksWorld state model ([`blocks`]), seeded problem
//! generation ([`dataset`]), plan validation ([`validate`]), in-house solvers
//! ([`solver`]), problem-file equivalence ([`equivalence`]), the four model
//! pipelines ([`pipelines`]) and run aggregation ([`report`], [`run`]).

pub mod assets;
pub mod blocks;
pub mod dataset;
pub mod equivalence;
pub mod exec;
pub mod pddl;
pub mod pipelines;
pub mod report;
pub mod run;
pub mod sexpr;
pub mod solver;
pub mod validate;

/// Exact integer type for state-space sizes.
pub type Count = num_bigint::BigUint;
/// Exact ratio type for compression ratios.
pub type Ratio = num_rational::Ratio<u64>;
