//! Shared fixtures for the integration test targets.
#![allow(dead_code)]

use planform::dataset::{build_suite, gen_xxl, Family, ProblemInstance, SuiteSpec};
use planform::pddl::print_problem;
use planform::pipelines::{
    header_text, BackendError, CallKind, Completion, OracleBackend, SandboxConfig, ScriptedBackend, Strategy,
    StrategyConfig, FailureCause,
};

pub const EXAMPLE_GENERATOR: &str = include_str!("../fixtures/example_generator.py");

/// A suite with every bucket size, kept small.
pub fn small_suite(family: Family, per_size: usize) -> Vec<ProblemInstance> {
    let buckets = [5, 30, 50, 75, 100].map(|n| (n, per_size)).to_vec();
    build_suite(&SuiteSpec::new(family, 7, buckets)).unwrap()
}

fn generator(body: &str) -> String {
    format!("<generator>\n{body}\n</generator>")
}

pub struct CauseCase {
    pub cause: FailureCause,
    pub inst: ProblemInstance,
    pub backend: ScriptedBackend,
    pub config: StrategyConfig,
}

/// One instance per failure cause, each with a backend corrupted so that
/// exactly that cause is produced.
pub fn cause_cases() -> Vec<CauseCase> {
    let inst = gen_xxl(5, 11);
    let truth = inst.ground_truth.clone();
    let config = |s: Strategy| {
        let mut c = StrategyConfig::new(s);
        c.max_retries = 0;
        c
    };
    let sandboxed = |edit: &dyn Fn(&mut SandboxConfig)| {
        let mut c = config(Strategy::HigherOrder);
        edit(c.sandbox.as_mut().unwrap());
        c
    };
    let constant = |text: String| ScriptedBackend::constant("corrupt", text);

    let mut dropped = truth.clone();
    let first = dropped.init.iter().next().cloned().unwrap();
    dropped.init.remove(&first);
    let header = header_text(&truth);

    let cases: Vec<(FailureCause, ScriptedBackend, StrategyConfig)> = vec![
        (
            FailureCause::Backend,
            ScriptedBackend::new("down", |_| Err(BackendError::Other { message: "offline".into() })),
            config(Strategy::Planner),
        ),
        (FailureCause::Extraction, constant("I think you should stack them.".into()), config(Strategy::Planner)),
        (FailureCause::PlanParse, constant("<plan>\n1. (pickup block1)\n</plan>".into()), config(Strategy::Planner)),
        (FailureCause::PlanInvalid, constant("<plan>\n(stack block1 block1)\n</plan>".into()), config(Strategy::Planner)),
        (
            FailureCause::ProblemParse,
            constant("<problem_file>(define (problem x)</problem_file>".into()),
            config(Strategy::Formalizer),
        ),
        (
            FailureCause::Mismatch,
            constant(format!("<problem_file>\n{}</problem_file>", print_problem(&dropped))),
            config(Strategy::Formalizer),
        ),
        (
            FailureCause::HeaderFailed,
            ScriptedBackend::new("bad-header", move |r| {
                Ok(Completion::text(match r.meta.kind {
                    CallKind::Header => "<header>(problem x) (:domain blocksworld)</header>".to_string(),
                    _ => format!("<header>{header}</header>"),
                }))
            }),
            config(Strategy::Dnc),
        ),
        (
            FailureCause::SandboxTimeout,
            constant(generator("while True:\n    pass")),
            sandboxed(&|s| s.timeout_ms = 500),
        ),
        (FailureCause::SandboxExit, constant(generator("for i in range(3):\n    pass\nraise SystemExit(3)")), config(Strategy::HigherOrder)),
        (FailureCause::MissingOutput, constant(generator("for i in range(3):\n    print(i)")), config(Strategy::HigherOrder)),
        (
            FailureCause::OutputTooLarge,
            constant(generator(
                "with open('problem.pddl', 'w') as f:\n    for i in range(100000):\n        f.write('(clear block1)\\n')",
            )),
            sandboxed(&|s| s.output_cap = 4096),
        ),
        (FailureCause::GuardRejected, constant(generator("open('problem.pddl', 'w').write('(define)')")), config(Strategy::HigherOrder)),
        (
            FailureCause::SandboxSetup,
            constant(generator("for i in range(3):\n    pass")),
            sandboxed(&|s| s.interpreter = vec!["/nonexistent/interpreter".into()]),
        ),
    ];
    cases.into_iter().map(|(cause, backend, config)| CauseCase { cause, inst: inst.clone(), backend, config }).collect()
}

pub fn oracle_for(instances: &[ProblemInstance]) -> OracleBackend {
    OracleBackend::new(instances.iter().cloned())
}
