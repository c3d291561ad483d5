//! Built-in benchmark suites comparing plan-driven against baseline
//! evaluation at desk scale: star joins, chain joins, transitive closure,
//! and a small university-style workload with a recursive organization
//! hierarchy.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use crate::cost::Strategy;
use crate::engine::{evaluate, EvaluationMetrics, PlanChoice};
use crate::optimizer::optimize;
use crate::parser::parse_program;
use crate::plan::PlannerInput;
use crate::stats::{collect_stats, derive_planner_inputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    StarJoin,
    ChainJoin,
    TransitiveClosure,
    LubmMicro,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        match s {
            "star-join" => Some(Suite::StarJoin),
            "chain-join" => Some(Suite::ChainJoin),
            "transitive-closure" => Some(Suite::TransitiveClosure),
            "lubm-micro" => Some(Suite::LubmMicro),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::StarJoin => "star-join",
            Suite::ChainJoin => "chain-join",
            Suite::TransitiveClosure => "transitive-closure",
            Suite::LubmMicro => "lubm-micro",
        }
    }

    pub fn all() -> [Suite; 4] {
        [Suite::StarJoin, Suite::ChainJoin, Suite::TransitiveClosure, Suite::LubmMicro]
    }
}

/// Rule text plus generated facts for one (suite, size) cell.
#[derive(Debug, Clone)]
pub struct GeneratedCase {
    pub rules: String,
    pub facts: String,
    pub fact_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BenchError {
    SizeTooLarge { size: usize, limit: usize },
    Failed(String),
}

impl std::fmt::Display for BenchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BenchError::SizeTooLarge { size, limit } => {
                write!(f, "generator budget exceeded: size {} over the limit {}", size, limit)
            }
            BenchError::Failed(msg) => write!(f, "{}", msg),
        }
    }
}

impl std::error::Error for BenchError {}

const SIZE_LIMIT: usize = 2_000_000;

/// Generates a case with roughly `size` facts, deterministically from the
/// seed.
pub fn generate(suite: Suite, size: usize, seed: u64) -> Result<GeneratedCase, BenchError> {
    if size > SIZE_LIMIT {
        return Err(BenchError::SizeTooLarge { size, limit: SIZE_LIMIT });
    }
    let mut rng = SplitMix64::seed_from_u64(seed ^ (suite.name().len() as u64) << 32);
    let mut facts = String::new();
    let mut count = 0usize;
    let emit = |facts: &mut String, count: &mut usize, line: std::fmt::Arguments| {
        facts.write_fmt(line).expect("string write");
        facts.push('\n');
        *count += 1;
    };
    let rules;
    match suite {
        Suite::StarJoin => {
            rules = "\
q(I,V1,V2,V3) :- src(I,D1,D2,D3), dim1(D1,V1), dim2(D2,V2), dim3(D3,V3).\n"
                .to_string();
            let dim = if size == 0 { 0 } else { (size / 100).max(4) };
            let src = size.saturating_sub(3 * dim);
            for d in 0..dim {
                emit(&mut facts, &mut count, format_args!("dim1({},{}).", d, d % 17));
                emit(&mut facts, &mut count, format_args!("dim2({},{}).", d, d % 13));
                emit(&mut facts, &mut count, format_args!("dim3({},{}).", d, d % 11));
            }
            for i in 0..src {
                let (a, b, c) = (
                    rng.random_range(0..dim.max(1)),
                    rng.random_range(0..dim.max(1)),
                    rng.random_range(0..dim.max(1)),
                );
                emit(&mut facts, &mut count, format_args!("src({},{},{},{}).", i, a, b, c));
            }
        }
        Suite::ChainJoin => {
            // e3 dominates and sits last in source order; a planner that
            // reverses the chain indexes the small relations instead.
            rules = "q(X,W) :- e1(X,Y), e2(Y,Z), e3(Z,W).\n".to_string();
            let n1 = size / 20;
            let n2 = (3 * size) / 20;
            let n3 = size.saturating_sub(n1 + n2);
            for i in 0..n1 {
                emit(&mut facts, &mut count, format_args!("e1({},{}).", i, i));
            }
            for j in 0..n2 {
                emit(&mut facts, &mut count, format_args!("e2({},{}).", j % n1.max(1), j));
            }
            for k in 0..n3 {
                emit(&mut facts, &mut count, format_args!("e3({},{}).", k % n2.max(1), k));
            }
        }
        Suite::TransitiveClosure => {
            // Disjoint chains of 8 edges keep the closure linear in the
            // input (36 closure tuples per chain).
            rules = "t(X,Y) :- e(X,Y).\nt(X,Y) :- e(X,Z), t(Z,Y).\n".to_string();
            let mut emitted = 0usize;
            let mut node = 0usize;
            while emitted < size {
                let len = 8.min(size - emitted);
                for i in 0..len {
                    emit(&mut facts, &mut count, format_args!("e({},{}).", node + i, node + i + 1));
                }
                node += len + 1;
                emitted += len;
            }
        }
        Suite::LubmMicro => {
            rules = "\
enrolled(S,C) :- student(S), takes(S,C), course(C).
teaches(P,C) :- professor(P), teacherOf(P,C), course(C).
advised(S,P) :- advisor(S,P), professor(P), student(S).
coworker(P1,P2) :- worksFor(P1,D), worksFor(P2,D).
deptMember(S,D) :- memberOf(S,D).
sameDept(S1,S2) :- memberOf(S1,D), memberOf(S2,D).
classmates(S1,S2) :- takes(S1,C), takes(S2,C).
advisedCourse(S,C) :- advisor(S,P), teacherOf(P,C).
orgUnit(D,U) :- subOrg(D,U).
orgUnit(D,U) :- subOrg(D,V), orgUnit(V,U).
"
            .to_string();
            // Roughly: takes 3S, memberOf S, student S, course S,
            // advisor S/2, teacherOf S/5, professor S/10, worksFor S/10,
            // subOrg S/8: about 6.5 S facts in total.
            let students = (size * 2) / 13;
            let courses = students;
            let professors = (students / 10).max(if students > 0 { 1 } else { 0 });
            let depts = (students / 8).max(if students > 0 { 1 } else { 0 });
            for s in 0..students {
                emit(&mut facts, &mut count, format_args!("student({}).", s));
                for k in 0..3usize {
                    let c = (s * 3 + k * 7) % courses.max(1);
                    emit(&mut facts, &mut count, format_args!("takes({},{}).", s, c));
                }
                emit(&mut facts, &mut count, format_args!("memberOf({},{}).", s, s % depts.max(1)));
                if s % 2 == 0 {
                    let p = rng.random_range(0..professors.max(1));
                    emit(&mut facts, &mut count, format_args!("advisor({},{}).", s, p));
                }
            }
            for c in 0..courses {
                emit(&mut facts, &mut count, format_args!("course({}).", c));
            }
            for p in 0..professors {
                emit(&mut facts, &mut count, format_args!("professor({}).", p));
                emit(&mut facts, &mut count, format_args!("worksFor({},{}).", p, p % depts.max(1)));
                for k in 0..2usize {
                    let c = (p * 5 + k) % courses.max(1);
                    emit(&mut facts, &mut count, format_args!("teacherOf({},{}).", p, c));
                }
            }
            // Organization chains of six departments each.
            let mut d = 0usize;
            while d + 1 < depts {
                let end = (d + 6).min(depts - 1);
                for i in d..end {
                    emit(&mut facts, &mut count, format_args!("subOrg({},{}).", i, i + 1));
                }
                d = end + 1;
            }
        }
    }
    Ok(GeneratedCase { rules, facts, fact_count: count })
}

/// One benchmark measurement: the same case evaluated with the planner's
/// schema and with the per-rule baseline.
#[derive(Debug, Clone)]
pub struct BenchCell {
    pub suite: &'static str,
    pub size: usize,
    pub seed: u64,
    pub strategy: String,
    pub fact_count: usize,
    pub plan_cost: String,
    pub plan_metrics: EvaluationMetrics,
    pub baseline_metrics: EvaluationMetrics,
    pub models_agree: bool,
    pub model_atoms: usize,
}

impl BenchCell {
    /// plan / baseline index entries; 1.0 when both are zero.
    pub fn entry_ratio(&self) -> f64 {
        if self.baseline_metrics.total_index_entries == 0 {
            if self.plan_metrics.total_index_entries == 0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.plan_metrics.total_index_entries as f64
                / self.baseline_metrics.total_index_entries as f64
        }
    }

    pub fn time_ratio(&self) -> f64 {
        let base = self.baseline_metrics.wall_time.as_secs_f64();
        if base == 0.0 {
            1.0
        } else {
            self.plan_metrics.wall_time.as_secs_f64() / base
        }
    }

    /// Every deterministic field, for reproducibility checks (wall times
    /// vary between runs and are excluded).
    pub fn fingerprint(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.suite,
            self.size,
            self.seed,
            self.strategy,
            self.fact_count,
            self.plan_cost,
            self.plan_metrics.indices_created,
            self.plan_metrics.total_index_entries,
            self.plan_metrics.derived_tuples,
            self.baseline_metrics.indices_created,
            self.baseline_metrics.total_index_entries,
            self.baseline_metrics.derived_tuples,
            self.model_atoms,
        )
    }
}

/// Runs one cell: generate, plan with statistics-derived costs and keys,
/// then evaluate plan-driven and baseline. Wall times are the median of
/// three runs.
pub fn run_cell(
    suite: Suite,
    size: usize,
    seed: u64,
    strategy: &Strategy,
) -> Result<BenchCell, BenchError> {
    let case = generate(suite, size, seed)?;
    let text = format!("{}{}", case.rules, case.facts);
    let program = parse_program(&text).map_err(|e| BenchError::Failed(e.to_string()))?;

    let stats = collect_stats(&program.facts);
    let (costs, keys) = derive_planner_inputs(&stats, 1.0);
    let mut builder = PlannerInput::builder(program.clone()).strategy(strategy.clone());
    for (entry, cost) in costs {
        builder = builder.cost(entry, cost).map_err(|e| BenchError::Failed(e.to_string()))?;
    }
    for entry in keys {
        builder = builder.key(entry).map_err(|e| BenchError::Failed(e.to_string()))?;
    }
    let input = builder.build().map_err(|e| BenchError::Failed(e.to_string()))?;
    let optimized = optimize(&input).map_err(|e| BenchError::Failed(e.to_string()))?;

    let median = |choice: PlanChoice| -> Result<(crate::engine::Model, EvaluationMetrics), BenchError> {
        let mut runs = Vec::new();
        for _ in 0..3 {
            runs.push(evaluate(&program, choice, &[]).map_err(|e| BenchError::Failed(e.to_string()))?);
        }
        runs.sort_by_key(|(_, m)| m.wall_time);
        Ok(runs.swap_remove(1))
    };
    let (plan_model, plan_metrics) = median(PlanChoice::Plan(&optimized.plan))?;
    let (base_model, baseline_metrics) = median(PlanChoice::Baseline)?;

    Ok(BenchCell {
        suite: suite.name(),
        size,
        seed,
        strategy: strategy.to_string(),
        fact_count: case.fact_count,
        plan_cost: optimized.cost.to_string(),
        models_agree: plan_model == base_model,
        model_atoms: plan_model.total_atoms(),
        plan_metrics,
        baseline_metrics,
    })
}

pub fn render_text(cells: &[BenchCell]) -> String {
    let mut out = String::new();
    if let Some(first) = cells.first() {
        let _ = writeln!(out, "seed: {}  strategy: {}", first.seed, first.strategy);
    }
    let _ = writeln!(
        out,
        "{:<20} {:>9} {:>7} {:>13} {:>13} {:>8} {:>9} {:>9} {:>6}",
        "suite", "facts", "atoms", "plan.entries", "base.entries", "saved%", "plan.ms", "base.ms", "agree"
    );
    for c in cells {
        let saved = 100.0 * (1.0 - c.entry_ratio());
        let _ = writeln!(
            out,
            "{:<20} {:>9} {:>7} {:>13} {:>13} {:>8.1} {:>9.2} {:>9.2} {:>6}",
            c.suite,
            c.fact_count,
            c.model_atoms,
            c.plan_metrics.total_index_entries,
            c.baseline_metrics.total_index_entries,
            saved,
            c.plan_metrics.wall_time.as_secs_f64() * 1000.0,
            c.baseline_metrics.wall_time.as_secs_f64() * 1000.0,
            c.models_agree,
        );
    }
    out
}

pub fn render_json(cells: &[BenchCell]) -> serde_json::Value {
    serde_json::Value::Array(
        cells
            .iter()
            .map(|c| {
                serde_json::json!({
                    "suite": c.suite,
                    "size": c.size,
                    "seed": c.seed,
                    "strategy": c.strategy,
                    "fact_count": c.fact_count,
                    "plan_cost": c.plan_cost,
                    "model_atoms": c.model_atoms,
                    "models_agree": c.models_agree,
                    "entry_ratio": c.entry_ratio(),
                    "time_ratio": c.time_ratio(),
                    "plan": c.plan_metrics.to_json(),
                    "baseline": c.baseline_metrics.to_json(),
                })
            })
            .collect(),
    )
}
