use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, ExecError, ExecSpec};
use crate::validate::{parse_plan, Plan, PlanParseError};

const OUTPUT_NAME: &str = "plan.out";

/// A planner binary invoked through a command template.
///
/// `{domain}`, `{problem}` and `{output}` are substituted with absolute paths
/// after the template is split into words. When `{output}` is absent the plan
/// is read from stdout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalPlanner {
    pub command_template: String,
    #[serde(with = "millis")]
    pub timeout: Duration,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("command template is empty or has unbalanced quotes")]
    BadTemplate,
    #[error(transparent)]
    Spawn(#[from] ExecError),
    #[error("planner timed out after {0:?}")]
    Timeout(Duration),
    #[error("planner exited with status {code:?}: {stderr}")]
    NonZeroExit { code: Option<i32>, stderr: String },
    #[error("planner produced no output file")]
    MissingOutput,
    #[error("unparseable planner output: {0}")]
    Unparseable(#[from] PlanParseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn absolute(path: &Path) -> std::io::Result<PathBuf> {
    if path.is_absolute() {
        Ok(path.to_path_buf())
    } else {
        Ok(std::env::current_dir()?.join(path))
    }
}

/// Run the configured planner on one problem inside a private scratch directory.
pub fn solve_external(domain_path: &Path, problem_path: &Path, planner: &ExternalPlanner) -> Result<Plan, ExternalError> {
    let words = shlex::split(&planner.command_template).filter(|w| !w.is_empty()).ok_or(ExternalError::BadTemplate)?;
    let scratch = tempfile::tempdir()?;
    let output = scratch.path().join(OUTPUT_NAME);
    let (domain, problem) = (absolute(domain_path)?, absolute(problem_path)?);
    let uses_output = planner.command_template.contains("{output}");
    let words: Vec<String> = words
        .into_iter()
        .map(|w| {
            w.replace("{domain}", &domain.to_string_lossy())
                .replace("{problem}", &problem.to_string_lossy())
                .replace("{output}", &output.to_string_lossy())
        })
        .collect();

    let spec = ExecSpec::new(words[0].clone(), words[1..].to_vec(), scratch.path(), planner.timeout);
    let outcome = exec::run(&spec)?;
    if outcome.timed_out {
        return Err(ExternalError::Timeout(planner.timeout));
    }
    if !outcome.success() {
        return Err(ExternalError::NonZeroExit { code: outcome.code(), stderr: outcome.stderr_text() });
    }
    let text = if uses_output {
        std::fs::read_to_string(&output).map_err(|_| ExternalError::MissingOutput)?
    } else {
        outcome.stdout_text()
    };
    Ok(parse_plan(&text)?)
}
