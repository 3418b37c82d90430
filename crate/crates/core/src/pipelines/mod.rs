//! The four model-driven strategies and the machinery they share.
//!
//! * planner: the model writes the plan directly.
//! * formalizer: the model writes the whole problem file.
//! * dnc: one call for the file header, then one call per description clause,
//!   each answered with a single fact; the pieces are stitched together here.
//! * higher-order: the model writes a program that emits the problem file,
//!   which is run in a sandbox.
//!
//! Every run ends in an [`EvalRecord`]. Bad model output never panics or
//! aborts; it is mapped to a [`FailureCause`].

mod backend;
mod dnc;
mod extract;
mod oracle;
mod remote;
mod sandbox;
mod strategies;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub use backend::{
    Backend, BackendError, CallKind, CallMeta, Completion, CompletionRequest, GenerationParams, ScriptedBackend,
};
pub use dnc::{consolidate, parse_fact, FactIssue};
pub use extract::{extract_tagged, ExtractError};
pub use oracle::{generator_program, header_text, OracleBackend};
pub use remote::{RemoteBackend, RemoteConfig};
pub use sandbox::{has_loop, run_generator, SandboxConfig, SandboxError};
pub use strategies::{evaluate, run_dnc, run_formalizer, run_higher_order, run_planner};

use crate::assets;
use crate::dataset::Family;
use crate::equivalence::{DiffReport, ErrorFlags};
use crate::pddl::DomainModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "planner")]
    Planner,
    #[serde(rename = "formalizer")]
    Formalizer,
    #[serde(rename = "dnc")]
    Dnc,
    #[serde(rename = "higher-order")]
    HigherOrder,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Planner, Strategy::Formalizer, Strategy::Dnc, Strategy::HigherOrder];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Planner => "planner",
            Strategy::Formalizer => "formalizer",
            Strategy::Dnc => "dnc",
            Strategy::HigherOrder => "higher-order",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s || (s == "higher_order" && *k == Strategy::HigherOrder))
            .ok_or_else(|| format!("unknown strategy `{s}` (expected planner, formalizer, dnc or higher-order)"))
    }
}

/// System prompts, one per call kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub planner: String,
    pub formalizer: String,
    pub dnc_header: String,
    pub dnc_fact: String,
    pub higher_order: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            planner: assets::PLANNER_PROMPT.into(),
            formalizer: assets::FORMALIZER_PROMPT.into(),
            dnc_header: assets::DNC_HEADER_PROMPT.into(),
            dnc_fact: assets::DNC_FACT_PROMPT.into(),
            higher_order: assets::HIGHER_ORDER_PROMPT.into(),
        }
    }
}

impl PromptSet {
    pub fn for_kind(&self, kind: CallKind) -> &str {
        match kind {
            CallKind::Planner => &self.planner,
            CallKind::Formalizer => &self.formalizer,
            CallKind::Header => &self.dnc_header,
            CallKind::Fact => &self.dnc_fact,
            CallKind::Generator => &self.higher_order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("the {0} strategy needs a non-empty {1} prompt")]
    MissingPrompt(Strategy, &'static str),
    #[error("the higher-order strategy needs sandbox settings")]
    MissingSandbox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub prompts: PromptSet,
    pub params: GenerationParams,
    /// Extra attempts per call when the answer cannot be used.
    pub max_retries: usize,
    /// Concurrent fact calls per instance.
    pub fact_parallelism: usize,
    pub sandbox: Option<SandboxConfig>,
    /// Also store every prompt next to its response.
    pub save_prompts: bool,
}

impl StrategyConfig {
    pub fn new(strategy: Strategy) -> Self {
        StrategyConfig {
            strategy,
            prompts: PromptSet::default(),
            params: GenerationParams::default(),
            max_retries: 2,
            fact_parallelism: 1,
            sandbox: (strategy == Strategy::HigherOrder).then(SandboxConfig::default),
            save_prompts: false,
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let need = |text: &str, name| {
            if text.trim().is_empty() {
                Err(ConfigError::MissingPrompt(self.strategy, name))
            } else {
                Ok(())
            }
        };
        match self.strategy {
            Strategy::Planner => need(&self.prompts.planner, "planner"),
            Strategy::Formalizer => need(&self.prompts.formalizer, "formalizer"),
            Strategy::Dnc => {
                need(&self.prompts.dnc_header, "header")?;
                need(&self.prompts.dnc_fact, "fact")
            }
            Strategy::HigherOrder => {
                need(&self.prompts.higher_order, "higher-order")?;
                self.sandbox.as_ref().map(|_| ()).ok_or(ConfigError::MissingSandbox)
            }
        }
    }
}

/// Why a run was judged invalid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    Backend,
    Extraction,
    PlanParse,
    PlanInvalid,
    ProblemParse,
    Mismatch,
    HeaderFailed,
    SandboxTimeout,
    SandboxExit,
    MissingOutput,
    OutputTooLarge,
    GuardRejected,
    SandboxSetup,
}

impl FailureCause {
    pub const ALL: [FailureCause; 13] = [
        FailureCause::Backend,
        FailureCause::Extraction,
        FailureCause::PlanParse,
        FailureCause::PlanInvalid,
        FailureCause::ProblemParse,
        FailureCause::Mismatch,
        FailureCause::HeaderFailed,
        FailureCause::SandboxTimeout,
        FailureCause::SandboxExit,
        FailureCause::MissingOutput,
        FailureCause::OutputTooLarge,
        FailureCause::GuardRejected,
        FailureCause::SandboxSetup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureCause::Backend => "backend",
            FailureCause::Extraction => "extraction",
            FailureCause::PlanParse => "plan_parse",
            FailureCause::PlanInvalid => "plan_invalid",
            FailureCause::ProblemParse => "problem_parse",
            FailureCause::Mismatch => "mismatch",
            FailureCause::HeaderFailed => "header_failed",
            FailureCause::SandboxTimeout => "sandbox_timeout",
            FailureCause::SandboxExit => "sandbox_exit",
            FailureCause::MissingOutput => "missing_output",
            FailureCause::OutputTooLarge => "output_too_large",
            FailureCause::GuardRejected => "guard_rejected",
            FailureCause::SandboxSetup => "sandbox_setup",
        }
    }
}

impl fmt::Display for FailureCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one strategy on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub run_id: String,
    pub instance_id: String,
    pub family: Family,
    pub n: usize,
    pub strategy: Strategy,
    pub backend_id: String,
    /// Plan validity for the planner, exact problem-file match otherwise.
    pub valid: bool,
    pub failure_cause: Option<FailureCause>,
    pub flags: ErrorFlags,
    /// Length of a plan that validated against the ground truth.
    pub plan_length: Option<usize>,
    /// For formalizer strategies: whether solving the candidate yields a plan
    /// that validates against the ground truth.
    pub end_to_end_valid: Option<bool>,
    pub fact_failures: usize,
    pub multi_atom_facts: usize,
    pub compression_ratio: String,
    pub calls: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub wall_ms: u64,
    pub artifacts: Vec<String>,
    pub detail: Option<String>,
    pub diff: Option<DiffReport>,
}

/// Domain material and output locations shared by every run.
#[derive(Debug, Clone)]
pub struct Env {
    pub domain: DomainModel,
    pub domain_pddl: String,
    pub domain_nl: String,
    pub run_id: String,
    /// Where raw responses are written; nothing is stored when `None`.
    pub artifacts: Option<PathBuf>,
}

impl Env {
    pub fn new(domain_pddl: &str, domain_nl: &str) -> Result<Self, crate::pddl::PddlError> {
        Ok(Env {
            domain: crate::pddl::parse_domain(domain_pddl)?,
            domain_pddl: domain_pddl.to_string(),
            domain_nl: domain_nl.to_string(),
            run_id: "adhoc".into(),
            artifacts: None,
        })
    }

    /// The bundled BlocksWorld domain, no artifact directory.
    pub fn shipped() -> &'static Env {
        static ENV: OnceLock<Env> = OnceLock::new();
        ENV.get_or_init(|| Env::new(assets::DOMAIN_PDDL, assets::DOMAIN_NL).expect("bundled domain parses"))
    }

    /// User message: domain in both forms followed by the problem text.
    pub fn user_prompt(&self, problem_text: &str) -> String {
        format!(
            "Domain description:\n{}\n\nDomain PDDL:\n{}\n\nProblem description:\n{}\n",
            self.domain_nl.trim_end(),
            self.domain_pddl.trim_end(),
            problem_text.trim_end()
        )
    }
}
