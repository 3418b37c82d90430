//! `planform` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a checked plan is invalid or two problems
//! differ, 2 on any error. Errors are printed to stderr as one JSON object.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use planform::blocks::count_states;
use planform::dataset::{build_suite, gen_suite, load_suite, Family, ProblemInstance, SuiteSpec, DEFAULT_PER_SIZE, DEFAULT_SIZES};
use planform::equivalence::{classify, diff_problems};
use planform::pddl::{parse_domain, parse_problem, DomainModel, ProblemModel};
use planform::pipelines::{
    Backend, Env, OracleBackend, PromptSet, RemoteBackend, RemoteConfig, SandboxConfig, Strategy, StrategyConfig,
};
use planform::report::aggregate;
use planform::run::{load_records, run_suite, RECORDS_FILE};
use planform::solver::{solve_external, solve_heuristic, solve_optimal_bfs, ExternalPlanner};
use planform::validate::{parse_plan, validate};
use planform::assets;

#[derive(Parser)]
#[command(name = "planform", version, about = "BlocksWorld formalization benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem suite into a directory.
    Gen {
        #[arg(long, value_parser = parse_family)]
        family: Family,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Block counts, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_PER_SIZE)]
        per_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a problem file and print the plan.
    Solve {
        problem: PathBuf,
        /// Domain file; the bundled BlocksWorld domain when omitted.
        #[arg(long)]
        domain: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Heuristic)]
        method: Method,
        /// Planner command for `--method external`, with `{domain}`, `{problem}` and optionally `{output}`.
        #[arg(long)]
        planner: Option<String>,
        #[arg(long, default_value_t = 60_000)]
        timeout_ms: u64,
        /// State budget for `--method bfs`.
        #[arg(long, default_value_t = 2_000_000)]
        budget: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a plan against a problem.
    Validate { domain: PathBuf, problem: PathBuf, plan: PathBuf },
    /// Compare a candidate problem file with a reference one.
    Diff {
        candidate: PathBuf,
        truth: PathBuf,
        #[arg(long)]
        domain: Option<PathBuf>,
    },
    /// Evaluate a strategy on a suite with a backend.
    Run {
        #[arg(long)]
        strategy: Strategy,
        /// A suite directory, or `xxl` / `unravel` to generate one in memory.
        #[arg(long)]
        suite: String,
        /// `mock-oracle` or a TOML backend configuration file.
        #[arg(long)]
        backend: String,
        /// Run directory; records are appended and the run resumes if it exists.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_PER_SIZE)]
        per_size: usize,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Aggregate records into report.txt, report.csv and series.csv.
    Report {
        /// Run directories or records files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output directory; the first run directory when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the number of BlocksWorld states for n blocks.
    Count { n: usize },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Heuristic,
    Bfs,
    External,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse()
}

/// Backend and strategy settings read from TOML.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    backend: RemoteConfig,
    #[serde(default)]
    strategy: StrategyOverrides,
    sandbox: Option<SandboxConfig>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyOverrides {
    max_retries: Option<usize>,
    fact_parallelism: Option<usize>,
    save_prompts: Option<bool>,
    /// Directory holding replacement prompt files, named like the bundled ones.
    prompts_dir: Option<PathBuf>,
}

enum Outcome {
    Ok,
    Negative,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_domain(path: Option<&Path>) -> Result<DomainModel> {
    match path {
        Some(p) => parse_domain(&read(p)?).with_context(|| format!("parsing {}", p.display())),
        None => Ok(assets::blocksworld_domain()),
    }
}

fn load_problem(path: &Path, domain: Option<&DomainModel>) -> Result<ProblemModel> {
    parse_problem(&read(path)?, domain).with_context(|| format!("parsing {}", path.display()))
}

/// Write to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(value: &impl serde::Serialize) {
    emit(&(serde_json::to_string_pretty(value).expect("output serializes") + "\n"));
}

fn buckets(sizes: &[usize], per_size: usize) -> Vec<(usize, usize)> {
    sizes.iter().map(|&n| (n, per_size)).collect()
}

fn load_prompts(dir: &Path) -> Result<PromptSet> {
    let mut set = PromptSet::default();
    for (file, slot) in [
        ("planner.txt", &mut set.planner),
        ("formalizer.txt", &mut set.formalizer),
        ("dnc_header.txt", &mut set.dnc_header),
        ("dnc_fact.txt", &mut set.dnc_fact),
        ("higher_order.txt", &mut set.higher_order),
    ] {
        let path = dir.join(file);
        if path.exists() {
            *slot = read(&path)?;
        }
    }
    Ok(set)
}

fn cmd_gen(family: Family, seed: u64, sizes: &[usize], per_size: usize, out: &Path) -> Result<Outcome> {
    let spec = SuiteSpec::new(family, seed, buckets(sizes, per_size));
    let manifest = gen_suite(out, &spec)?;
    print_json(&json!({ "dir": out, "family": family, "instances": manifest.instances.len() }));
    Ok(Outcome::Ok)
}

fn cmd_solve(
    problem_path: &Path,
    domain_path: Option<&Path>,
    method: Method,
    planner: Option<String>,
    timeout_ms: u64,
    budget: usize,
    output: Option<&Path>,
) -> Result<Outcome> {
    let plan = match method {
        Method::External => {
            let command_template = planner.ok_or_else(|| anyhow!("--method external needs --planner"))?;
            let domain_path = domain_path.ok_or_else(|| anyhow!("--method external needs --domain"))?;
            let planner = ExternalPlanner { command_template, timeout: Duration::from_millis(timeout_ms) };
            solve_external(domain_path, problem_path, &planner)?
        }
        Method::Heuristic | Method::Bfs => {
            let domain = load_domain(domain_path)?;
            let problem = load_problem(problem_path, Some(&domain))?;
            match method {
                Method::Bfs => solve_optimal_bfs(&problem, budget)?,
                _ => solve_heuristic(&problem)?,
            }
        }
    };
    match output {
        Some(path) => std::fs::write(path, plan.to_string()).with_context(|| format!("writing {}", path.display()))?,
        None => emit(&plan.to_string()),
    }
    eprintln!("{}", json!({ "length": plan.len() }));
    Ok(Outcome::Ok)
}

fn cmd_validate(domain: &Path, problem: &Path, plan: &Path) -> Result<Outcome> {
    let domain = load_domain(Some(domain))?;
    let problem = load_problem(problem, Some(&domain))?;
    let plan = parse_plan(&read(plan)?)?;
    let verdict = validate(&domain, &problem, &plan);
    print_json(&json!({
        "valid": verdict.valid,
        "length": plan.len(),
        "failure_step": verdict.failure_step,
        "failure_reason": verdict.failure_reason,
    }));
    Ok(if verdict.valid { Outcome::Ok } else { Outcome::Negative })
}

fn cmd_diff(candidate: &Path, truth: &Path, domain: Option<&Path>) -> Result<Outcome> {
    let domain = domain.map(|p| load_domain(Some(p))).transpose()?;
    let candidate = load_problem(candidate, domain.as_ref())?;
    let truth = load_problem(truth, domain.as_ref())?;
    let report = diff_problems(&candidate, &truth);
    let flags = classify(&report);
    print_json(&json!({ "match": report.matches, "flags": flags, "report": report }));
    Ok(if report.matches { Outcome::Ok } else { Outcome::Negative })
}

struct RunArgs {
    strategy: Strategy,
    suite: String,
    backend: String,
    out: Option<PathBuf>,
    seed: u64,
    sizes: Vec<usize>,
    per_size: usize,
    parallelism: usize,
    run_id: Option<String>,
}

fn cmd_run(args: RunArgs) -> Result<Outcome> {
    let suite_dir = Path::new(&args.suite);
    let (instances, mut env, suite_label): (Vec<ProblemInstance>, Env, String) = if suite_dir.is_dir() {
        let suite = load_suite(suite_dir)?;
        let domain_pddl = read(&suite_dir.join("domain.pddl"))?;
        let domain_nl = read(&suite_dir.join("domain.nl"))?;
        let env = Env::new(&domain_pddl, &domain_nl).context("parsing suite domain")?;
        (suite.instances, env, suite.manifest.family.to_string())
    } else {
        let family = parse_family(&args.suite).map_err(|e| anyhow!("--suite is neither a directory nor a family: {e}"))?;
        let spec = SuiteSpec::new(family, args.seed, buckets(&args.sizes, args.per_size));
        (build_suite(&spec)?, Env::shipped().clone(), family.to_string())
    };
    let run_id = args.run_id.clone().unwrap_or_else(|| format!("{}-{}-{}", suite_label, args.strategy, args.backend_label()));
    env.run_id = run_id.clone();
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(&run_id));

    let mut config = StrategyConfig::new(args.strategy);
    let backend: Arc<dyn Backend> = if args.backend == "mock-oracle" {
        Arc::new(OracleBackend::new(instances.iter().cloned()))
    } else {
        let path = Path::new(&args.backend);
        let file: RunConfigFile =
            toml::from_str(&read(path)?).with_context(|| format!("parsing backend config {}", path.display()))?;
        let o = file.strategy;
        if let Some(v) = o.max_retries {
            config.max_retries = v;
        }
        if let Some(v) = o.fact_parallelism {
            config.fact_parallelism = v;
        }
        if let Some(v) = o.save_prompts {
            config.save_prompts = v;
        }
        if let Some(dir) = &o.prompts_dir {
            config.prompts = load_prompts(&path.parent().unwrap_or(Path::new(".")).join(dir))?;
        }
        if file.sandbox.is_some() && args.strategy == Strategy::HigherOrder {
            config.sandbox = file.sandbox;
        }
        config.params.temperature = file.backend.temperature;
        config.params.max_tokens = file.backend.max_tokens;
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Arc::new(RemoteBackend::new(file.backend, Some(&out.join("requests.jsonl")))?)
    };

    let summary = run_suite(&instances, backend.as_ref(), &config, &env, &out, args.parallelism)?;
    let records = load_records(&summary.records_path)?;
    let report = aggregate(&records);
    report.write(&out)?;
    emit(&report.to_text());
    eprintln!(
        "{}",
        json!({ "run_dir": out, "evaluated": summary.evaluated, "skipped": summary.skipped })
    );
    Ok(Outcome::Ok)
}

impl RunArgs {
    fn backend_label(&self) -> String {
        Path::new(&self.backend).file_stem().map_or_else(|| self.backend.clone(), |s| s.to_string_lossy().into_owned())
    }
}

fn cmd_report(inputs: &[PathBuf], out: Option<&Path>) -> Result<Outcome> {
    let mut records = Vec::new();
    for input in inputs {
        let path = if input.is_dir() { input.join(RECORDS_FILE) } else { input.clone() };
        records.extend(load_records(&path)?);
    }
    if records.is_empty() {
        bail!("no records found");
    }
    let report = aggregate(&records);
    let dir = match out {
        Some(dir) => dir.to_path_buf(),
        None if inputs[0].is_dir() => inputs[0].clone(),
        None => inputs[0].parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    };
    report.write(&dir)?;
    emit(&report.to_text());
    Ok(Outcome::Ok)
}

fn cmd_count(n: usize) -> Result<Outcome> {
    let size = count_states(n);
    print_json(&json!({
        "n": n,
        "arm_empty": size.arm_empty.to_string(),
        "with_holding": size.with_holding.to_string(),
        "log10": size.log10(),
        "log10_with_holding": size.log10_with_holding(),
    }));
    Ok(Outcome::Ok)
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Gen { family, seed, sizes, per_size, out } => cmd_gen(family, seed, &sizes, per_size, &out),
        Command::Solve { problem, domain, method, planner, timeout_ms, budget, output } => {
            cmd_solve(&problem, domain.as_deref(), method, planner, timeout_ms, budget, output.as_deref())
        }
        Command::Validate { domain, problem, plan } => cmd_validate(&domain, &problem, &plan),
        Command::Diff { candidate, truth, domain } => cmd_diff(&candidate, &truth, domain.as_deref()),
        Command::Run { strategy, suite, backend, out, seed, sizes, per_size, parallelism, run_id } => {
            cmd_run(RunArgs { strategy, suite, backend, out, seed, sizes, per_size, parallelism, run_id })
        }
        Command::Report { inputs, out } => cmd_report(&inputs, out.as_deref()),
        Command::Count { n } => cmd_count(n),
    }
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_string()),
    };
    match dispatch(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(1),
        Err(e) => fail("runtime", format!("{e:#}")),
    }
}
