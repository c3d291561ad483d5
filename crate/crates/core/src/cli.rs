//! The `evalplan` command line: plan, check, run, stats, emit-facts,
//! annotate, oracle, and bench.
//!
//! Exit codes: 0 success, 1 domain errors (unsatisfiable inputs,
//! inadmissible plans, unstratifiable programs), 2 usage and I/O errors.
//! Diagnostics go to standard error; results go to standard output unless
//! `--out` names a file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::admissibility::is_admissible;
use crate::bench::{render_json, render_text, run_cell, Suite};
use crate::cost::Strategy;
use crate::engine::{evaluate, PlanChoice};
use crate::interop::{apply_planner_facts, emit_annotations, emit_asp_facts, parse_planner_facts};
use crate::optimizer::{
    optimize, oracle_optimize, select_representative, OptimizeError, OracleError,
    DEFAULT_ORACLE_BUDGET,
};
use crate::parser::{parse_program_with, Profile};
use crate::plan::{read_plan, wellformedness_diagnostics, write_plan, EvaluationPlan, PlannerInput};
use crate::program::Program;

#[derive(Parser)]
#[command(name = "evalplan", version, about = "Datalog evaluation planner and plan-driven engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write results to a file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress informational messages on standard error.
    #[arg(long, global = true)]
    quiet: bool,
    /// Seed for randomized subcommands (bench).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat key=value configuration file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct StrategyArgs {
    /// Comma list of cost functions, e.g. w1,w3,w2.
    #[arg(long, conflicts_with = "preset")]
    strategy: Option<String>,
    /// Named strategy: sigma1 = (w2,w4), sigma2 = (w1,w2,w3,w4).
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Clone, Default)]
struct InputArgs {
    /// Additional program text, typically fact files.
    #[arg(long = "facts")]
    facts: Vec<PathBuf>,
    /// Constraint fact files: relation/2, index/3, key/2, fixedIndex/2,
    /// fixedPosition/3.
    #[arg(long = "constraints")]
    constraints: Vec<PathBuf>,
    /// Default index cost for IDB predicates without an explicit entry.
    #[arg(long = "idb-cost")]
    idb_cost: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an optimal evaluation plan and write the plan file.
    Plan {
        program: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        /// Use the exhaustive oracle search instead of branch-and-bound.
        #[arg(long)]
        oracle: bool,
        /// Search-space budget for the oracle.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Check a plan file: wellformedness and per-rule admissibility.
    Check {
        program: PathBuf,
        plan: PathBuf,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Evaluate a program, optionally under a plan, and report metrics.
    Run {
        program: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        /// Plan file to follow; the default is the per-rule baseline policy.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Force the baseline policy (the default when no plan is given).
        #[arg(long, conflicts_with = "plan")]
        baseline: bool,
        /// Print one relation, e.g. --query t/2.
        #[arg(long)]
        query: Option<String>,
        /// Print evaluation metrics in the given format (text or json).
        #[arg(long)]
        metrics: Option<String>,
    },
    /// Collect relation statistics from fact files and emit index/key facts.
    Stats {
        facts: Vec<PathBuf>,
        /// Scale factor for extrapolating costs from a small sample.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Emit the solver-facing fact stream for a planner input.
    EmitFacts {
        program: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
    },
    /// Annotate a program with a plan's index and order directives.
    Annotate {
        program: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Exhaustively enumerate all optimal plans (desk-scale inputs only).
    Oracle {
        program: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Compare plan-driven and baseline evaluation on built-in suites.
    Bench {
        /// Comma list of suites (star-join, chain-join, transitive-closure,
        /// lubm-micro); default: all.
        #[arg(long)]
        suite: Option<String>,
        /// Comma list of sizes, scientific notation accepted (1e4).
        #[arg(long, default_value = "1e4")]
        sizes: String,
        #[command(flatten)]
        strategy: StrategyArgs,
        /// Output format: text or json.
        #[arg(long, default_value = "text")]
        metrics: String,
    },
}

enum CliError {
    Domain(String),
    Usage(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Domain(m) | CliError::Usage(m) | CliError::Io(m) => m,
        }
    }
}

/// Runs the CLI on the given argument vector and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

/// Flat key=value configuration, lowest-precedence settings source.
#[derive(Default, Clone)]
struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    fn load(path: Option<&Path>) -> Result<Config, CliError> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = read_file(path)?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                match line.split_once('=') {
                    Some((k, v)) => {
                        values.insert(k.trim().to_string(), v.trim().to_string());
                    }
                    None => {
                        return Err(CliError::Usage(format!(
                            "{}: line {}: expected key=value",
                            path.display(),
                            lineno + 1
                        )))
                    }
                }
            }
        }
        Ok(Config { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

struct Session {
    out: Option<PathBuf>,
    quiet: bool,
    seed: Option<u64>,
    config: Config,
}

impl Session {
    fn info(&self, message: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", message.as_ref());
        }
    }

    fn emit(&self, content: &str) -> Result<(), CliError> {
        match &self.out {
            Some(path) => fs::write(path, content)
                .map_err(|e| CliError::Io(format!("{}: {}", path.display(), e))),
            None => {
                print!("{}", content);
                Ok(())
            }
        }
    }

    fn strategy(&self, args: &StrategyArgs) -> Result<Strategy, CliError> {
        let flag = args
            .strategy
            .clone()
            .or_else(|| self.config.get("strategy").map(str::to_string));
        let preset = args
            .preset
            .clone()
            .or_else(|| self.config.get("preset").map(str::to_string));
        if let Some(text) = flag {
            return Strategy::parse(&text).map_err(|e| CliError::Usage(e.to_string()));
        }
        match preset.as_deref() {
            None => Ok(Strategy::sigma2()),
            Some("sigma1") => Ok(Strategy::sigma1()),
            Some("sigma2") => Ok(Strategy::sigma2()),
            Some(other) => Err(CliError::Usage(format!(
                "unknown preset `{}` (expected sigma1 or sigma2)",
                other
            ))),
        }
    }

    fn budget(&self, flag: Option<u64>) -> Result<u64, CliError> {
        if let Some(b) = flag {
            return Ok(b);
        }
        match self.config.get("budget") {
            None => Ok(DEFAULT_ORACLE_BUDGET),
            Some(text) => text
                .parse()
                .map_err(|_| CliError::Usage(format!("bad budget `{}` in config", text))),
        }
    }

    fn seed(&self) -> Result<u64, CliError> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match self.config.get("seed") {
            None => Ok(42),
            Some(text) => {
                text.parse().map_err(|_| CliError::Usage(format!("bad seed `{}` in config", text)))
            }
        }
    }

    fn scale(&self, flag: Option<f64>) -> Result<f64, CliError> {
        let value = match flag {
            Some(v) => v,
            None => match self.config.get("scale") {
                None => 1.0,
                Some(text) => text
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad scale `{}` in config", text)))?,
            },
        };
        if value <= 0.0 {
            return Err(CliError::Usage("scale must be positive".into()));
        }
        Ok(value)
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e)))
}

/// Reads and parses the program plus any fact files as one source, so all
/// files share one predicate space. Parse errors are mapped back to the
/// file they came from.
fn load_program(
    program: &Path,
    facts: &[PathBuf],
    profile: Profile,
) -> Result<Program, CliError> {
    let mut combined = String::new();
    let mut offsets: Vec<(&Path, usize)> = Vec::new();
    let mut line = 0usize;
    for path in std::iter::once(program).chain(facts.iter().map(PathBuf::as_path)) {
        let text = read_file(path)?;
        offsets.push((path, line));
        line += text.lines().count() + 1;
        combined.push_str(&text);
        // Separate files and keep line counts in sync with `offsets`.
        combined.push('\n');
    }
    parse_program_with(&combined, profile).map_err(|e| {
        let (path, start) = offsets
            .iter()
            .rev()
            .find(|(_, start)| e.line > *start)
            .copied()
            .unwrap_or((program, 0));
        CliError::Usage(format!(
            "{}: line {}, column {}: {}",
            path.display(),
            e.line - start,
            e.column,
            crate::parser::ParseError { line: e.line, column: e.column, kind: e.kind.clone() }
                .to_string()
                .split_once(": ")
                .map(|(_, tail)| tail.to_string())
                .unwrap_or_else(|| e.to_string())
        ))
    })
}

fn build_input(
    session: &Session,
    program: Program,
    args: &InputArgs,
    strategy: Strategy,
) -> Result<PlannerInput, CliError> {
    let mut builder = PlannerInput::builder(program).strategy(strategy);
    if let Some(cost) = args.idb_cost {
        builder = builder.idb_default_cost(cost);
    } else if let Some(text) = session.config.get("idb-cost") {
        let cost = text
            .parse()
            .map_err(|_| CliError::Usage(format!("bad idb-cost `{}` in config", text)))?;
        builder = builder.idb_default_cost(cost);
    }
    for path in &args.constraints {
        let text = read_file(path)?;
        let facts = parse_planner_facts(&text)
            .map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e)))?;
        builder = apply_planner_facts(builder, &facts)
            .map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e)))?;
    }
    builder.build().map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let session = Session {
        out: cli.out,
        quiet: cli.quiet,
        seed: cli.seed,
        config: Config::load(cli.config.as_deref())?,
    };
    match cli.command {
        Command::Plan { program, input, strategy, oracle, budget } => {
            let strategy = session.strategy(&strategy)?;
            let program = load_program(&program, &input.facts, Profile::Planner)?;
            let planner_input = build_input(&session, program, &input, strategy)?;
            let (plan, cost) = if oracle {
                let budget = session.budget(budget)?;
                let outcome = oracle_optimize(&planner_input, budget)
                    .map_err(|e| oracle_error(e))?;
                session.info(format!(
                    "oracle: {} optimal plan(s), cost {}",
                    outcome.optimal.len(),
                    outcome.cost
                ));
                let plan = select_representative(&outcome.optimal, planner_input.program())
                    .expect("non-empty optimum set")
                    .clone();
                (plan, outcome.cost)
            } else {
                let optimized = optimize(&planner_input).map_err(|e| optimize_error(e))?;
                (optimized.plan, optimized.cost)
            };
            session.info(format!("plan cost: {}", cost));
            session.emit(&write_plan(&plan, planner_input.program()))
        }
        Command::Check { program, plan, input } => {
            let program = load_program(&program, &input.facts, Profile::Planner)?;
            let plan_text = read_file(&plan)?;
            let plan = read_plan(&plan_text, &program)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let planner_input = build_input(&session, program, &input, Strategy::sigma2())?;
            let report = check_report(&plan, &planner_input);
            session.emit(&report.text)?;
            if report.ok {
                Ok(())
            } else {
                Err(CliError::Domain("plan is not admissible".into()))
            }
        }
        Command::Run { program, input, plan, baseline, query, metrics } => {
            let program = load_program(&program, &input.facts, Profile::Full)?;
            let plan = match (&plan, baseline) {
                (Some(path), _) => {
                    let text = read_file(path)?;
                    Some(read_plan(&text, &program).map_err(|e| CliError::Usage(e.to_string()))?)
                }
                (None, _) => None,
            };
            let choice = match &plan {
                Some(p) => PlanChoice::Plan(p),
                None => PlanChoice::Baseline,
            };
            let (model, measured) =
                evaluate(&program, choice, &[]).map_err(|e| CliError::Domain(e.to_string()))?;
            let mut out = String::new();
            match query {
                Some(spec) => {
                    let pred = program.pred_by_tag(&spec).ok_or_else(|| {
                        CliError::Usage(format!("unknown predicate `{}` (use name/arity)", spec))
                    })?;
                    if let Some(rel) = model.relation(pred) {
                        for tuple in rel {
                            let atom = crate::ast::Atom {
                                predicate: pred,
                                terms: tuple
                                    .iter()
                                    .cloned()
                                    .map(crate::ast::Term::Constant)
                                    .collect(),
                            };
                            out.push_str(&program.atom_text(&atom));
                            out.push_str(".\n");
                        }
                    }
                }
                None => {
                    for (pred, rel) in model.relations() {
                        out.push_str(&format!("{}: {}\n", program.pred(pred).tag(), rel.len()));
                    }
                }
            }
            match metrics.as_deref() {
                None => {}
                Some("text") => out.push_str(&format!("{}\n", measured)),
                Some("json") => {
                    out.push_str(&measured.to_json().to_string());
                    out.push('\n');
                }
                Some(other) => {
                    return Err(CliError::Usage(format!(
                        "unknown metrics format `{}` (text or json)",
                        other
                    )))
                }
            }
            session.emit(&out)
        }
        Command::Stats { facts, scale } => {
            if facts.is_empty() {
                return Err(CliError::Usage("stats needs at least one facts file".into()));
            }
            let scale = session.scale(scale)?;
            let (first, rest) = facts.split_first().expect("nonempty");
            let program = load_program(first, rest, Profile::Planner)?;
            let stats = crate::stats::collect_stats(&program.facts);
            let (costs, keys) = crate::stats::derive_planner_inputs(&stats, scale);
            session.info(crate::stats::report(&program, &stats));
            session.emit(&crate::stats::fact_lines(&program, &costs, &keys))
        }
        Command::EmitFacts { program, input, strategy } => {
            let strategy = session.strategy(&strategy)?;
            let program = load_program(&program, &input.facts, Profile::Planner)?;
            let planner_input = build_input(&session, program, &input, strategy)?;
            session.emit(&emit_asp_facts(&planner_input))
        }
        Command::Annotate { program, plan, input } => {
            let program = load_program(&program, &input.facts, Profile::Planner)?;
            let plan_text = read_file(&plan)?;
            let plan =
                read_plan(&plan_text, &program).map_err(|e| CliError::Usage(e.to_string()))?;
            let planner_input = build_input(&session, program, &input, Strategy::sigma2())?;
            let report = check_report(&plan, &planner_input);
            if !report.ok {
                return Err(CliError::Domain(format!(
                    "plan is not admissible; run `check` for details"
                )));
            }
            session.emit(&emit_annotations(planner_input.program(), &plan))
        }
        Command::Oracle { program, input, strategy, budget } => {
            let strategy = session.strategy(&strategy)?;
            let budget = session.budget(budget)?;
            let program = load_program(&program, &input.facts, Profile::Planner)?;
            let planner_input = build_input(&session, program, &input, strategy)?;
            let outcome =
                oracle_optimize(&planner_input, budget).map_err(|e| oracle_error(e))?;
            let representative = select_representative(&outcome.optimal, planner_input.program())
                .expect("non-empty optimum set");
            let mut out = String::new();
            out.push_str(&format!(
                "optimal cost: {}\noptimal plans: {}\n",
                outcome.cost,
                outcome.optimal.len()
            ));
            out.push_str(&write_plan(representative, planner_input.program()));
            session.emit(&out)
        }
        Command::Bench { suite, sizes, strategy, metrics } => {
            let strategy = session.strategy(&strategy)?;
            let seed = session.seed()?;
            let suites: Vec<Suite> = match suite {
                None => Suite::all().to_vec(),
                Some(list) => list
                    .split(',')
                    .map(|s| {
                        Suite::parse(s.trim()).ok_or_else(|| {
                            CliError::Usage(format!("unknown suite `{}`", s.trim()))
                        })
                    })
                    .collect::<Result<_, _>>()?,
            };
            let sizes: Vec<usize> = sizes
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| *v >= 0.0 && v.fract() == 0.0 || s.contains('e'))
                        .map(|v| v as usize)
                        .ok_or_else(|| CliError::Usage(format!("bad size `{}`", s)))
                })
                .collect::<Result<_, _>>()?;
            let mut cells = Vec::new();
            for &suite in &suites {
                for &size in &sizes {
                    session.info(format!("bench: {} at {}", suite.name(), size));
                    cells.push(
                        run_cell(suite, size, seed, &strategy)
                            .map_err(|e| CliError::Domain(e.to_string()))?,
                    );
                }
            }
            let rendered = match metrics.as_str() {
                "text" => render_text(&cells),
                "json" => format!("{}\n", render_json(&cells)),
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown metrics format `{}` (text or json)",
                        other
                    )))
                }
            };
            session.emit(&rendered)
        }
    }
}

struct CheckReport {
    text: String,
    ok: bool,
}

/// Wellformedness diagnostics plus one admissibility verdict per rule.
fn check_report(plan: &EvaluationPlan, input: &PlannerInput) -> CheckReport {
    let program = input.program();
    let mut text = String::new();
    let mut ok = true;
    for diag in wellformedness_diagnostics(plan, input) {
        text.push_str(&format!("wellformedness: {}\n", diag));
        ok = false;
    }
    for rule in program.planner_rules() {
        match plan.ordering(rule.id) {
            None => {} // already reported as a wellformedness diagnostic
            Some(ordering) if ordering.len() == rule.body.len() => {
                match is_admissible(rule, ordering, &plan.schema) {
                    Ok(()) => text.push_str(&format!("rule {}: admissible\n", rule.id)),
                    Err(violation) => {
                        ok = false;
                        text.push_str(&format!(
                            "rule {}: violation: {}\n",
                            rule.id,
                            violation.display(program, rule)
                        ));
                    }
                }
            }
            Some(_) => {} // length mismatch, reported above
        }
    }
    text.push_str(if ok { "plan: admissible\n" } else { "plan: not admissible\n" });
    CheckReport { text, ok }
}

fn optimize_error(e: OptimizeError) -> CliError {
    match e {
        OptimizeError::Unsat { .. } => CliError::Domain(e.to_string()),
        OptimizeError::Cost(_) => CliError::Usage(e.to_string()),
    }
}

fn oracle_error(e: OracleError) -> CliError {
    match e {
        OracleError::Unsat { .. } => CliError::Domain(e.to_string()),
        OracleError::BudgetExceeded { .. } => CliError::Domain(e.to_string()),
        OracleError::Cost(_) => CliError::Usage(e.to_string()),
    }
}
