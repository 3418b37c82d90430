use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use super::backend::{Backend, BackendError, CallKind, CallMeta, CompletionRequest};
use super::dnc::{check_header, consolidate, parse_fact};
use super::extract::{extract_tagged, ExtractError};
use super::sandbox::{run_generator, SandboxError};
use super::{Env, EvalRecord, FailureCause, Strategy, StrategyConfig};
use crate::dataset::{ProblemInstance, Section};
use crate::equivalence::{classify, diff_problems, ErrorFlags};
use crate::pddl::{parse_problem, Atom};
use crate::solver::solve_heuristic;
use crate::validate::{parse_plan, validate};

enum CallFailure {
    Backend(BackendError),
    Extraction(ExtractError),
    Rejected(String),
}

impl CallFailure {
    fn message(&self) -> String {
        match self {
            CallFailure::Backend(e) => e.to_string(),
            CallFailure::Extraction(e) => e.to_string(),
            CallFailure::Rejected(m) => m.clone(),
        }
    }
}

#[derive(Default)]
struct Tally {
    calls: usize,
    prompt_tokens: u64,
    completion_tokens: u64,
    artifacts: Vec<String>,
}

struct Session<'a> {
    inst: &'a ProblemInstance,
    backend: &'a dyn Backend,
    config: &'a StrategyConfig,
    env: &'a Env,
    strategy: Strategy,
    tally: Mutex<Tally>,
}

impl<'a> Session<'a> {
    fn save(&self, name: &str, content: &str) {
        let Some(root) = &self.env.artifacts else { return };
        let rel: PathBuf = [self.inst.id.as_str(), self.strategy.as_str(), name].iter().collect();
        let path = root.join(&rel);
        let written = path.parent().map_or(Ok(()), std::fs::create_dir_all).and_then(|_| std::fs::write(&path, content));
        if written.is_ok() {
            self.tally.lock().unwrap_or_else(|e| e.into_inner()).artifacts.push(rel.to_string_lossy().into_owned());
        }
    }

    /// One logical call: retried while the answer lacks its tag or fails `accept`.
    fn call<T>(
        &self,
        kind: CallKind,
        user: String,
        clause: Option<usize>,
        accept: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, CallFailure> {
        let stem = match clause {
            Some(i) => format!("{}-{:03}", kind.tag(), i),
            None => kind.tag().to_string(),
        };
        let mut last = CallFailure::Rejected("no attempt made".into());
        for attempt in 0..=self.config.max_retries {
            let request = CompletionRequest {
                system: self.config.prompts.for_kind(kind).to_string(),
                user: user.clone(),
                params: self.config.params.clone(),
                meta: CallMeta { kind, instance_id: self.inst.id.clone(), n: self.inst.n, clause, attempt },
            };
            if self.config.save_prompts {
                self.save(&format!("{stem}-a{attempt}.prompt.txt"), &format!("{}\n\n{}", request.system, request.user));
            }
            let completion = self.backend.complete(&request);
            {
                let mut tally = self.tally.lock().unwrap_or_else(|e| e.into_inner());
                tally.calls += 1;
                if let Ok(c) = &completion {
                    tally.prompt_tokens += c.prompt_tokens.unwrap_or(0);
                    tally.completion_tokens += c.completion_tokens.unwrap_or(0);
                }
            }
            let completion = completion.map_err(CallFailure::Backend)?;
            self.save(&format!("{stem}-a{attempt}.txt"), &completion.text);
            match extract_tagged(&completion.text, kind.tag()) {
                Err(e) => last = CallFailure::Extraction(e),
                Ok(body) => match accept(&body) {
                    Ok(v) => return Ok(v),
                    Err(m) => last = CallFailure::Rejected(m),
                },
            }
        }
        Err(last)
    }

    fn record(&self) -> EvalRecord {
        let ratio = self.inst.compression_ratio();
        EvalRecord {
            run_id: self.env.run_id.clone(),
            instance_id: self.inst.id.clone(),
            family: self.inst.family,
            n: self.inst.n,
            strategy: self.strategy,
            backend_id: self.backend.id(),
            valid: false,
            failure_cause: None,
            flags: ErrorFlags::default(),
            plan_length: None,
            end_to_end_valid: None,
            fact_failures: 0,
            multi_atom_facts: 0,
            compression_ratio: format!("{}/{}", ratio.numer(), ratio.denom()),
            calls: 0,
            prompt_tokens: 0,
            completion_tokens: 0,
            wall_ms: 0,
            artifacts: Vec::new(),
            detail: None,
            diff: None,
        }
    }

    fn finish(self, mut record: EvalRecord, started: Instant) -> EvalRecord {
        let tally = self.tally.into_inner().unwrap_or_else(|e| e.into_inner());
        record.calls = tally.calls;
        record.prompt_tokens = tally.prompt_tokens;
        record.completion_tokens = tally.completion_tokens;
        record.artifacts = tally.artifacts;
        record.wall_ms = started.elapsed().as_millis() as u64;
        if record.valid {
            record.failure_cause = None;
        }
        record
    }

    /// Judge a candidate problem file by exact match, and separately by
    /// solving it and validating the plan against the ground truth.
    fn judge(&self, record: &mut EvalRecord, candidate_text: &str) {
        self.save("candidate.pddl", candidate_text);
        let candidate = match parse_problem(candidate_text, Some(&self.env.domain)) {
            Ok(c) => c,
            Err(e) => return fail(record, FailureCause::ProblemParse, e.to_string()),
        };
        let truth = &self.inst.ground_truth;
        let report = diff_problems(&candidate, truth);
        record.flags = classify(&report);
        record.valid = report.matches;
        if !report.matches {
            record.failure_cause = Some(FailureCause::Mismatch);
        }
        record.diff = Some(report);
        let e2e = solve_heuristic(&candidate)
            .ok()
            .filter(|plan| validate(&self.env.domain, truth, plan).valid);
        record.end_to_end_valid = Some(e2e.is_some());
        record.plan_length = e2e.map(|p| p.len());
    }
}

fn fail(record: &mut EvalRecord, cause: FailureCause, detail: impl Into<String>) {
    record.valid = false;
    record.failure_cause = Some(cause);
    record.detail = Some(detail.into());
}

fn call_failure(record: &mut EvalRecord, failure: CallFailure, otherwise: FailureCause) {
    let cause = match failure {
        CallFailure::Backend(_) => FailureCause::Backend,
        _ => otherwise,
    };
    fail(record, cause, failure.message());
}

fn planner(s: &Session, record: &mut EvalRecord) {
    let user = s.env.user_prompt(&s.inst.nl_description);
    let body = match s.call(CallKind::Planner, user, None, |b| Ok(b.to_string())) {
        Ok(b) => b,
        Err(f) => return call_failure(record, f, FailureCause::Extraction),
    };
    let plan = match parse_plan(&body) {
        Ok(p) => p,
        Err(e) => return fail(record, FailureCause::PlanParse, e.to_string()),
    };
    s.save("plan.txt", &plan.to_string());
    let verdict = validate(&s.env.domain, &s.inst.ground_truth, &plan);
    if verdict.valid {
        record.valid = true;
        record.plan_length = Some(plan.len());
    } else {
        let step = verdict.failure_step.map_or("end".to_string(), |i| format!("step {i}"));
        let reason = verdict.failure_reason.map(|r| r.to_string()).unwrap_or_default();
        fail(record, FailureCause::PlanInvalid, format!("{step}: {reason}"));
    }
}

fn formalizer(s: &Session, record: &mut EvalRecord) {
    let user = s.env.user_prompt(&s.inst.nl_description);
    match s.call(CallKind::Formalizer, user, None, |b| Ok(b.to_string())) {
        Ok(text) => s.judge(record, &text),
        Err(f) => call_failure(record, f, FailureCause::Extraction),
    }
}

type FactOutcome = Result<Vec<Atom>, CallFailure>;

fn dnc(s: &Session, record: &mut EvalRecord) {
    let user = s.env.user_prompt(&s.inst.nl_description);
    let header = match s.call(CallKind::Header, user, None, |b| {
        check_header(b).map(|_| b.to_string()).map_err(|e| e.to_string())
    }) {
        Ok(h) => h,
        Err(f) => return call_failure(record, f, FailureCause::HeaderFailed),
    };

    let clauses = s.inst.clauses();
    let results: Mutex<Vec<Option<FactOutcome>>> =
        Mutex::new((0..clauses.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(clause) = clauses.get(i) else { break };
        let user = s.env.user_prompt(&clause.text);
        let outcome = s.call(CallKind::Fact, user, Some(i), |b| parse_fact(b, &s.env.domain).map_err(|e| e.to_string()));
        results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(outcome);
    };
    let workers = s.config.fact_parallelism.clamp(1, clauses.len().max(1));
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(work);
            }
        });
    }

    let mut init = Vec::new();
    let mut goal = Vec::new();
    let mut problems = Vec::new();
    let results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    for (clause, outcome) in clauses.iter().zip(results) {
        match outcome.expect("every clause was attempted") {
            Ok(atoms) => {
                if atoms.len() > 1 {
                    record.multi_atom_facts += 1;
                }
                match clause.section {
                    Section::Init => init.extend(atoms),
                    Section::Goal => goal.extend(atoms),
                }
            }
            Err(f) => {
                record.fact_failures += 1;
                problems.push(format!("`{}`: {}", clause.text, f.message()));
            }
        }
    }
    if !problems.is_empty() {
        record.detail = Some(format!("{} fact failure(s); first {}", problems.len(), problems[0]));
    }
    let text = consolidate(&header, &init, &goal);
    s.judge(record, &text);
}

fn higher_order(s: &Session, record: &mut EvalRecord) {
    let Some(sandbox) = &s.config.sandbox else {
        return fail(record, FailureCause::SandboxSetup, "no sandbox configured");
    };
    let user = s.env.user_prompt(&s.inst.nl_description);
    let program = match s.call(CallKind::Generator, user, None, |b| Ok(b.to_string())) {
        Ok(p) => p,
        Err(f) => return call_failure(record, f, FailureCause::Extraction),
    };
    s.save(&sandbox.program_file, &program);
    match run_generator(&program, sandbox) {
        Ok(text) => s.judge(record, &text),
        Err(e) => {
            let cause = match e {
                SandboxError::GuardRejected => FailureCause::GuardRejected,
                SandboxError::Setup(_) => FailureCause::SandboxSetup,
                SandboxError::Timeout(_) => FailureCause::SandboxTimeout,
                SandboxError::Exit { .. } => FailureCause::SandboxExit,
                SandboxError::MissingOutput(_) => FailureCause::MissingOutput,
                SandboxError::OutputTooLarge(_) => FailureCause::OutputTooLarge,
            };
            fail(record, cause, e.to_string());
        }
    }
}

fn run_as(strategy: Strategy, inst: &ProblemInstance, backend: &dyn Backend, config: &StrategyConfig, env: &Env) -> EvalRecord {
    let started = Instant::now();
    let session = Session { inst, backend, config, env, strategy, tally: Mutex::new(Tally::default()) };
    let mut record = session.record();
    match strategy {
        Strategy::Planner => planner(&session, &mut record),
        Strategy::Formalizer => formalizer(&session, &mut record),
        Strategy::Dnc => dnc(&session, &mut record),
        Strategy::HigherOrder => higher_order(&session, &mut record),
    }
    session.finish(record, started)
}

/// Run `config.strategy` on `inst`.
pub fn evaluate(inst: &ProblemInstance, backend: &dyn Backend, config: &StrategyConfig, env: &Env) -> EvalRecord {
    run_as(config.strategy, inst, backend, config, env)
}

pub fn run_planner(inst: &ProblemInstance, backend: &dyn Backend, config: &StrategyConfig) -> EvalRecord {
    run_as(Strategy::Planner, inst, backend, config, Env::shipped())
}

pub fn run_formalizer(inst: &ProblemInstance, backend: &dyn Backend, config: &StrategyConfig) -> EvalRecord {
    run_as(Strategy::Formalizer, inst, backend, config, Env::shipped())
}

pub fn run_dnc(inst: &ProblemInstance, backend: &dyn Backend, config: &StrategyConfig) -> EvalRecord {
    run_as(Strategy::Dnc, inst, backend, config, Env::shipped())
}

pub fn run_higher_order(inst: &ProblemInstance, backend: &dyn Backend, config: &StrategyConfig) -> EvalRecord {
    run_as(Strategy::HigherOrder, inst, backend, config, Env::shipped())
}
