use std::path::Path;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, ExecSpec};

fn default_interpreter() -> Vec<String> {
    vec!["python3".into()]
}

fn default_program_file() -> String {
    "generator.py".into()
}

fn default_output_file() -> String {
    "problem.pddl".into()
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_output_cap() -> u64 {
    256 * 1024 * 1024
}

fn default_loop_keywords() -> Vec<String> {
    vec!["for".into(), "while".into()]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandboxConfig {
    /// Command and leading arguments; the program file name is appended.
    #[serde(default = "default_interpreter")]
    pub interpreter: Vec<String>,
    #[serde(default = "default_program_file")]
    pub program_file: String,
    #[serde(default = "default_output_file")]
    pub output_file: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Largest file the program may write, in bytes.
    #[serde(default = "default_output_cap")]
    pub output_cap: u64,
    /// Restrict writes to the scratch directory and cut network access.
    #[serde(default = "yes")]
    pub confine: bool,
    /// A program must contain at least one of these words.
    #[serde(default = "default_loop_keywords")]
    pub loop_keywords: Vec<String>,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            interpreter: default_interpreter(),
            program_file: default_program_file(),
            output_file: default_output_file(),
            timeout_ms: default_timeout_ms(),
            output_cap: default_output_cap(),
            confine: true,
            loop_keywords: default_loop_keywords(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SandboxError {
    #[error("program contains no loop construct")]
    GuardRejected,
    #[error("sandbox setup failed: {0}")]
    Setup(String),
    #[error("program exceeded the {0} ms wall-clock limit")]
    Timeout(u64),
    #[error("program exited with status {code:?}: {stderr}")]
    Exit { code: Option<i32>, stderr: String },
    #[error("program wrote no `{0}`")]
    MissingOutput(String),
    #[error("output exceeds the {0}-byte cap")]
    OutputTooLarge(u64),
}

/// Whether `program` mentions any loop keyword as a whole word.
pub fn has_loop(program: &str, keywords: &[String]) -> bool {
    keywords.iter().any(|k| {
        Regex::new(&format!(r"\b{}\b", regex::escape(k))).map(|re| re.is_match(program)).unwrap_or(false)
    })
}

/// Whether some file in `dir` reached `cap`. Interpreters that ignore
/// `SIGXFSZ` see a failed write instead and exit with an ordinary error.
fn hit_size_cap(dir: &Path, cap: u64) -> bool {
    std::fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .any(|e| e.metadata().is_ok_and(|m| m.is_file() && m.len() >= cap))
}

/// Run a generated program in a fresh scratch directory and return the
/// problem file it writes.
pub fn run_generator(program: &str, config: &SandboxConfig) -> Result<String, SandboxError> {
    if !has_loop(program, &config.loop_keywords) {
        return Err(SandboxError::GuardRejected);
    }
    let (command, leading) = config.interpreter.split_first().ok_or_else(|| SandboxError::Setup("empty interpreter".into()))?;
    if config.confine && !exec::confinement_available() {
        return Err(SandboxError::Setup("filesystem confinement is unavailable on this kernel".into()));
    }
    let scratch = tempfile::tempdir().map_err(|e| SandboxError::Setup(e.to_string()))?;
    let work = scratch.path().join("work");
    std::fs::create_dir(&work).map_err(|e| SandboxError::Setup(e.to_string()))?;
    std::fs::write(work.join(&config.program_file), program).map_err(|e| SandboxError::Setup(e.to_string()))?;

    let mut args = leading.to_vec();
    args.push(config.program_file.clone());
    let mut spec = ExecSpec::new(command.clone(), args, &work, Duration::from_millis(config.timeout_ms));
    spec.clean_env = true;
    spec.capture_limit = 64 * 1024;
    spec.file_size_limit = Some(config.output_cap);
    if config.confine {
        spec.confine_writes_to = Some(work.clone());
    }
    let outcome = exec::run(&spec).map_err(|e| SandboxError::Setup(e.to_string()))?;
    if outcome.timed_out {
        return Err(SandboxError::Timeout(config.timeout_ms));
    }
    if outcome.exceeded_file_size() || (!outcome.success() && hit_size_cap(&work, config.output_cap)) {
        return Err(SandboxError::OutputTooLarge(config.output_cap));
    }
    if !outcome.success() {
        return Err(SandboxError::Exit { code: outcome.code(), stderr: outcome.stderr_text() });
    }
    let output = work.join(&config.output_file);
    let meta = std::fs::metadata(&output).map_err(|_| SandboxError::MissingOutput(config.output_file.clone()))?;
    if !meta.is_file() {
        return Err(SandboxError::MissingOutput(config.output_file.clone()));
    }
    if meta.len() > config.output_cap {
        return Err(SandboxError::OutputTooLarge(config.output_cap));
    }
    std::fs::read_to_string(&output).map_err(|e| SandboxError::Setup(e.to_string()))
}
