//! Running a strategy over a suite with bounded parallelism.
//!
//! Workers evaluate instances and send records over a channel to the calling
//! thread, which is the only writer of `records.jsonl`. The file is append
//! only; a rerun skips every `(instance, strategy)` pair already on disk.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ProblemInstance;
use crate::pipelines::{evaluate, Backend, ConfigError, Env, EvalRecord, Strategy, StrategyConfig};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const ARTIFACTS_DIR: &str = "artifacts";
pub const RUN_FILE: &str = "run.json";

/// Settings of the latest invocation in a run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunInfo {
    pub run_id: String,
    pub backend_id: String,
    pub instances: usize,
    pub parallelism: usize,
    pub config: StrategyConfig,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Record { path: PathBuf, line: usize, source: serde_json::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Every complete record in a records file. A final line cut short by an
/// interrupted run is ignored.
pub fn load_records(path: &Path) -> Result<Vec<EvalRecord>, RunError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>().map_err(io_err(path))?;
    let last = lines.len();
    let mut records = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => records.push(r),
            Err(_) if i + 1 == last => {}
            Err(source) => return Err(RunError::Record { path: path.to_path_buf(), line: i + 1, source }),
        }
    }
    Ok(records)
}

/// Cut a trailing partial line so appends start on a fresh line.
fn repair_tail(path: &Path) -> Result<(), RunError> {
    let Ok(bytes) = std::fs::read(path) else { return Ok(()) };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    std::fs::write(path, &bytes[..keep]).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub evaluated: usize,
    pub skipped: usize,
    pub records_path: PathBuf,
}

/// Evaluate every pending instance and append the records under `run_dir`.
pub fn run_suite(
    instances: &[ProblemInstance],
    backend: &dyn Backend,
    config: &StrategyConfig,
    env: &Env,
    run_dir: &Path,
    parallelism: usize,
) -> Result<RunSummary, RunError> {
    config.check()?;
    std::fs::create_dir_all(run_dir).map_err(io_err(run_dir))?;
    let records_path = run_dir.join(RECORDS_FILE);
    repair_tail(&records_path)?;
    let done: BTreeSet<(String, Strategy)> = if records_path.exists() {
        load_records(&records_path)?.into_iter().map(|r| (r.instance_id, r.strategy)).collect()
    } else {
        BTreeSet::new()
    };
    let pending: Vec<&ProblemInstance> =
        instances.iter().filter(|i| !done.contains(&(i.id.clone(), config.strategy))).collect();
    let skipped = instances.len() - pending.len();

    let info = RunInfo {
        run_id: env.run_id.clone(),
        backend_id: backend.id().to_string(),
        instances: instances.len(),
        parallelism,
        config: config.clone(),
    };
    let info_path = run_dir.join(RUN_FILE);
    let info_text = serde_json::to_string_pretty(&info).expect("run info serializes") + "\n";
    std::fs::write(&info_path, info_text).map_err(io_err(&info_path))?;

    let mut env = env.clone();
    env.artifacts = Some(run_dir.join(ARTIFACTS_DIR));
    let mut out = OpenOptions::new().create(true).append(true).open(&records_path).map_err(io_err(&records_path))?;
    let next = AtomicUsize::new(0);
    let workers = parallelism.clamp(1, pending.len().max(1));
    let (tx, rx) = mpsc::channel::<EvalRecord>();
    let mut evaluated = 0;
    let mut write_error = None;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending, env) = (&next, &pending, &env);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(inst) = pending.get(i) else { break };
                if tx.send(evaluate(inst, backend, config, env)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for record in rx {
            let line = serde_json::to_string(&record).expect("records serialize");
            if let Err(e) = writeln!(out, "{line}").and_then(|_| out.flush()) {
                write_error = Some(e);
                break;
            }
            evaluated += 1;
        }
    });
    if let Some(e) = write_error {
        return Err(io_err(&records_path)(e));
    }
    Ok(RunSummary { evaluated, skipped, records_path })
}
