//! Plan-driven semi-naive bottom-up evaluation.
//!
//! Relations are insertion-ordered deduplicated tuple stores. Point-lookup
//! indices exist only on the argument positions the active schema allows,
//! are built lazily on first use, and are maintained as tuples arrive.
//! Body atoms are joined strictly in plan order; an atom is retrieved
//! through an index only when one of its schema arguments is bound at its
//! position, and is scanned otherwise. Stratified negation is evaluated
//! stratum by stratum, with negative literals as membership tests at the
//! end of their body.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::time::{Duration, Instant};

use indexmap::IndexSet;

use crate::admissibility::connected_groups;
use crate::ast::{Atom, Constant, PredId, Rule, Term};
use crate::plan::{ArgRef, EvaluationPlan, IndexingSchema, Ordering};
use crate::program::{Program, StratifyError};

pub type Tuple = Vec<Constant>;

/// How a rule body is ordered and which indices exist.
#[derive(Debug, Clone, Copy)]
pub enum PlanChoice<'a> {
    /// Follow a planner-produced plan.
    Plan(&'a EvaluationPlan),
    /// The built-in per-rule baseline: source order with components made
    /// contiguous, and a local index on every bound join argument.
    Baseline,
}

/// An extensional or intensional tuple store with per-argument hash indices.
#[derive(Debug)]
pub struct IndexedRelation {
    pred: PredId,
    tuples: IndexSet<Tuple>,
    /// 0-based argument -> value -> ascending tuple positions.
    indices: BTreeMap<usize, HashMap<Constant, Vec<usize>>>,
    /// 0-based argument positions the schema allows indices on.
    allowed: BTreeSet<usize>,
}

impl IndexedRelation {
    fn new(pred: PredId) -> Self {
        IndexedRelation { pred, tuples: IndexSet::new(), indices: BTreeMap::new(), allowed: BTreeSet::new() }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    fn insert(&mut self, tuple: Tuple) -> bool {
        let (pos, new) = self.tuples.insert_full(tuple);
        if new {
            for (arg, index) in self.indices.iter_mut() {
                let value = self.tuples[pos][*arg].clone();
                index.entry(value).or_default().push(pos);
            }
        }
        new
    }

    fn ensure_index(&mut self, arg: usize) -> bool {
        if self.indices.contains_key(&arg) {
            return false;
        }
        let mut index: HashMap<Constant, Vec<usize>> = HashMap::new();
        for (pos, tuple) in self.tuples.iter().enumerate() {
            index.entry(tuple[arg].clone()).or_default().push(pos);
        }
        self.indices.insert(arg, index);
        true
    }

    fn distinct_count(&self, arg: usize) -> usize {
        if let Some(index) = self.indices.get(&arg) {
            return index.len();
        }
        let mut seen: HashSet<&Constant> = HashSet::new();
        for tuple in &self.tuples {
            seen.insert(&tuple[arg]);
        }
        seen.len()
    }

    fn index_count(&self) -> usize {
        self.indices.len()
    }
}

/// Memory and work counters for one evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationMetrics {
    /// Point-lookup indices actually built.
    pub indices_created: usize,
    /// Sum over built indices of their relation's final size.
    pub total_index_entries: usize,
    /// Number of per-atom retrieval operations (index probes and scans).
    pub join_iterations: u64,
    /// Successful full-body matches, duplicates included.
    pub derived_tuples: u64,
    pub wall_time: Duration,
}

impl EvaluationMetrics {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "indices_created": self.indices_created,
            "total_index_entries": self.total_index_entries,
            "join_iterations": self.join_iterations,
            "derived_tuples": self.derived_tuples,
            "wall_time_ms": self.wall_time.as_secs_f64() * 1000.0,
        })
    }
}

impl fmt::Display for EvaluationMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "indices created: {}, index entries: {}, join iterations: {}, derived tuples: {}, wall time: {:.3} ms",
            self.indices_created,
            self.total_index_entries,
            self.join_iterations,
            self.derived_tuples,
            self.wall_time.as_secs_f64() * 1000.0
        )
    }
}

/// The minimal model as sorted relations, for comparison and printing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    relations: BTreeMap<PredId, BTreeSet<Tuple>>,
}

impl Model {
    pub fn relation(&self, pred: PredId) -> Option<&BTreeSet<Tuple>> {
        self.relations.get(&pred)
    }

    pub fn relations(&self) -> impl Iterator<Item = (PredId, &BTreeSet<Tuple>)> {
        self.relations.iter().map(|(&p, t)| (p, t))
    }

    pub fn contains(&self, pred: PredId, tuple: &[Constant]) -> bool {
        self.relations.get(&pred).map(|r| r.contains(tuple)).unwrap_or(false)
    }

    pub fn total_atoms(&self) -> usize {
        self.relations.values().map(BTreeSet::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineError {
    Stratify(StratifyError),
    PlanMismatch(String),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Stratify(e) => write!(f, "{}", e),
            EngineError::PlanMismatch(msg) => write!(f, "plan does not match program: {}", msg),
        }
    }
}

impl std::error::Error for EngineError {}

impl From<StratifyError> for EngineError {
    fn from(e: StratifyError) -> Self {
        EngineError::Stratify(e)
    }
}

/// The baseline an engine would use without a planner: per rule, source
/// order with connected components made contiguous (negative literals last),
/// plus an index on every argument the ordering makes bound through a join.
/// Index choices are local per rule; the schema is their union.
pub fn default_policy_plan(program: &Program) -> EvaluationPlan {
    let mut schema = IndexingSchema::new();
    let mut orderings = BTreeMap::new();
    for rule in &program.rules {
        let order = baseline_order(rule);
        let mut positions = vec![0usize; rule.body.len()];
        for (pos0, &bi) in order.iter().enumerate() {
            positions[bi] = pos0 + 1;
        }
        let mut seen: HashSet<&str> = HashSet::new();
        for &bi in &order {
            let lit = &rule.body[bi];
            if lit.negative {
                continue;
            }
            for (i, term) in lit.atom.terms.iter().enumerate() {
                if let Term::Variable(v) = term {
                    if seen.contains(v.as_str()) {
                        schema.insert(ArgRef::new(lit.atom.predicate, i + 1));
                    }
                }
            }
            for v in lit.atom.variables() {
                seen.insert(v);
            }
        }
        orderings.insert(rule.id, Ordering::new(rule.id, positions).expect("permutation"));
    }
    EvaluationPlan { schema, orderings }
}

/// Body indices in baseline join order: positive atoms grouped into
/// contiguous components (blocks by first occurrence, source order within),
/// then negative literals in source order.
fn baseline_order(rule: &Rule) -> Vec<usize> {
    let positive_idx: Vec<usize> =
        rule.body.iter().enumerate().filter(|(_, l)| !l.negative).map(|(i, _)| i).collect();
    let positive_atoms: Vec<&Atom> = positive_idx.iter().map(|&i| &rule.body[i].atom).collect();
    let mut order = Vec::with_capacity(rule.body.len());
    for group in connected_groups(&positive_atoms) {
        for member in group {
            order.push(positive_idx[member]);
        }
    }
    for (i, lit) in rule.body.iter().enumerate() {
        if lit.negative {
            order.push(i);
        }
    }
    order
}

#[derive(Debug, Clone)]
enum Pat {
    Const(Constant),
    Var(usize),
}

#[derive(Debug, Clone)]
struct CompiledAtom {
    pred: PredId,
    pats: Vec<Pat>,
    /// Site key for the per-atom access-path choice cache.
    site: (usize, usize),
    /// True when the atom's predicate belongs to the stratum under
    /// evaluation (set per stratum).
    in_stratum: bool,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    head_pred: PredId,
    head: Vec<Pat>,
    /// Positive atoms in join order.
    steps: Vec<CompiledAtom>,
    /// Negative literals, checked after the positive join.
    negatives: Vec<CompiledAtom>,
    slot_count: usize,
}

fn compile_rule(rule: &Rule, ordering: Option<&Ordering>) -> Result<CompiledRule, EngineError> {
    let order: Vec<usize> = match ordering {
        Some(o) => {
            if o.len() != rule.body.len() {
                return Err(EngineError::PlanMismatch(format!(
                    "rule {}: ordering covers {} atoms, body has {}",
                    rule.id,
                    o.len(),
                    rule.body.len()
                )));
            }
            o.by_position()
        }
        None => baseline_order(rule),
    };
    fn pat_of(term: &Term, slots: &mut HashMap<String, usize>) -> Pat {
        match term {
            Term::Constant(c) => Pat::Const(c.clone()),
            Term::Variable(v) => {
                let next = slots.len();
                Pat::Var(*slots.entry(v.clone()).or_insert(next))
            }
        }
    }
    let mut slots: HashMap<String, usize> = HashMap::new();
    let mut steps = Vec::new();
    let mut negatives = Vec::new();
    for bi in order {
        let lit = &rule.body[bi];
        let atom = CompiledAtom {
            pred: lit.atom.predicate,
            pats: lit.atom.terms.iter().map(|t| pat_of(t, &mut slots)).collect(),
            site: (rule.id, bi),
            in_stratum: false,
        };
        if lit.negative {
            negatives.push(atom);
        } else {
            steps.push(atom);
        }
    }
    let head = rule.head.terms.iter().map(|t| pat_of(t, &mut slots)).collect();
    Ok(CompiledRule {
        head_pred: rule.head.predicate,
        head,
        steps,
        negatives,
        slot_count: slots.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RangeMode {
    Full,
    Old,
    Delta,
}

struct Engine {
    relations: Vec<IndexedRelation>,
    /// (old, full) length snapshot per predicate, taken at round starts.
    caps: Vec<(usize, usize)>,
    site_choice: HashMap<(usize, usize), Option<usize>>,
    indices_created: usize,
    join_iterations: u64,
    derived_tuples: u64,
}

impl Engine {
    fn new(program: &Program, schema: &IndexingSchema) -> Self {
        let mut relations: Vec<IndexedRelation> =
            (0..program.predicates.len()).map(|i| IndexedRelation::new(PredId(i as u32))).collect();
        for entry in schema.iter() {
            relations[entry.pred.index()].allowed.insert(entry.arg - 1);
        }
        Engine {
            relations,
            caps: vec![(0, 0); program.predicates.len()],
            site_choice: HashMap::new(),
            indices_created: 0,
            join_iterations: 0,
            derived_tuples: 0,
        }
    }

    fn snapshot_caps(&mut self, stratum: &HashSet<PredId>, previous: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let mut caps = Vec::with_capacity(self.relations.len());
        for (i, rel) in self.relations.iter().enumerate() {
            let full = rel.len();
            let old = if stratum.contains(&PredId(i as u32)) { previous[i].1 } else { full };
            caps.push((old, full));
        }
        caps
    }

    /// Bound value of a pattern under the current bindings.
    fn value_of(pats: &[Pat], bindings: &[Option<Constant>], i: usize) -> Option<Constant> {
        match &pats[i] {
            Pat::Const(c) => Some(c.clone()),
            Pat::Var(slot) => bindings[*slot].clone(),
        }
    }

    /// Picks (and caches) the index argument for a retrieval site: the bound
    /// schema argument with the most distinct values, ties to the lowest
    /// argument position. `None` when no bound argument is indexable.
    fn choose_access(
        &mut self,
        site: (usize, usize),
        pred: PredId,
        bound_args: &[usize],
    ) -> Option<usize> {
        if let Some(choice) = self.site_choice.get(&site) {
            return *choice;
        }
        let rel = &self.relations[pred.index()];
        // Highest relation-level selectivity wins; with one shared tuple
        // count that is the largest distinct count. Ties to the lowest
        // argument position.
        let mut best: Option<(usize, usize)> = None; // (distinct, arg)
        for a in bound_args.iter().copied().filter(|a| rel.allowed.contains(a)) {
            let distinct = rel.distinct_count(a);
            let better = match best {
                None => true,
                Some((bd, ba)) => distinct > bd || (distinct == bd && a < ba),
            };
            if better {
                best = Some((distinct, a));
            }
        }
        let choice = best.map(|(_, a)| a);
        self.site_choice.insert(site, choice);
        if let Some(arg) = choice {
            if self.relations[pred.index()].ensure_index(arg) {
                self.indices_created += 1;
            }
        }
        choice
    }

    /// Joins `rule.steps[step..]` under `bindings`, then checks negatives and
    /// emits head tuples into `out`. `delta_step` marks the step evaluated
    /// against the delta range; steps before it read the full snapshot,
    /// steps after it the old one (non-stratum atoms always read full).
    fn join(
        &mut self,
        rule: &CompiledRule,
        step: usize,
        delta_step: Option<usize>,
        bindings: &mut Vec<Option<Constant>>,
        out: &mut Vec<(PredId, Tuple)>,
    ) {
        if step == rule.steps.len() {
            for neg in &rule.negatives {
                let tuple: Tuple = neg
                    .pats
                    .iter()
                    .enumerate()
                    .map(|(i, _)| Self::value_of(&neg.pats, bindings, i).expect("safety"))
                    .collect();
                self.join_iterations += 1;
                let (_, full) = self.caps[neg.pred.index()];
                let rel = &self.relations[neg.pred.index()];
                if let Some(pos) = rel.tuples.get_index_of(&tuple) {
                    if pos < full {
                        return;
                    }
                }
            }
            self.derived_tuples += 1;
            let head: Tuple = rule
                .head
                .iter()
                .enumerate()
                .map(|(i, _)| Self::value_of(&rule.head, bindings, i).expect("safety"))
                .collect();
            out.push((rule.head_pred, head));
            return;
        }

        let atom = &rule.steps[step];
        let mode = match delta_step {
            _ if !atom.in_stratum => RangeMode::Full,
            Some(d) if step < d => RangeMode::Full,
            Some(d) if step == d => RangeMode::Delta,
            Some(_) => RangeMode::Old,
            None => RangeMode::Full,
        };
        let (old, full) = self.caps[atom.pred.index()];
        let (lo, hi) = match mode {
            RangeMode::Full => (0, full),
            RangeMode::Old => (0, old),
            RangeMode::Delta => (old, full),
        };
        if lo >= hi {
            return;
        }

        let bound_args: Vec<usize> = (0..atom.pats.len())
            .filter(|&i| Self::value_of(&atom.pats, bindings, i).is_some())
            .collect();
        let access = self.choose_access(atom.site, atom.pred, &bound_args);
        self.join_iterations += 1;

        // Collect matching tuple positions first; extending bindings while
        // scanning would alias the relation borrow.
        let matches: Vec<usize> = {
            let rel = &self.relations[atom.pred.index()];
            match access {
                Some(arg) => {
                    let value = Self::value_of(&atom.pats, bindings, arg).expect("bound");
                    match rel.indices[&arg].get(&value) {
                        None => Vec::new(),
                        Some(bucket) => {
                            let from = bucket.partition_point(|&p| p < lo);
                            let to = bucket.partition_point(|&p| p < hi);
                            bucket[from..to]
                                .iter()
                                .copied()
                                .filter(|&p| Self::tuple_matches(&rel.tuples[p], atom, bindings))
                                .collect()
                        }
                    }
                }
                None => (lo..hi)
                    .filter(|&p| Self::tuple_matches(&rel.tuples[p], atom, bindings))
                    .collect(),
            }
        };

        for pos in matches {
            let mut assigned: Vec<usize> = Vec::new();
            {
                let tuple = &self.relations[atom.pred.index()].tuples[pos];
                for (i, pat) in atom.pats.iter().enumerate() {
                    if let Pat::Var(slot) = pat {
                        if bindings[*slot].is_none() {
                            bindings[*slot] = Some(tuple[i].clone());
                            assigned.push(*slot);
                        }
                    }
                }
            }
            self.join(rule, step + 1, delta_step, bindings, out);
            for slot in assigned {
                bindings[slot] = None;
            }
        }
    }

    fn tuple_matches(tuple: &Tuple, atom: &CompiledAtom, bindings: &[Option<Constant>]) -> bool {
        atom.pats.iter().enumerate().all(|(i, pat)| match pat {
            Pat::Const(c) => &tuple[i] == c,
            Pat::Var(slot) => match &bindings[*slot] {
                Some(v) => &tuple[i] == v,
                None => {
                    // A repeated variable may bind earlier in this atom.
                    match atom.pats[..i].iter().position(|p| matches!(p, Pat::Var(s) if s == slot)) {
                        Some(j) => tuple[j] == tuple[i],
                        None => true,
                    }
                }
            },
        })
    }

    fn run_rule(
        &mut self,
        rule: &CompiledRule,
        delta_step: Option<usize>,
    ) -> Vec<(PredId, Tuple)> {
        let mut bindings = vec![None; rule.slot_count];
        let mut out = Vec::new();
        self.join(rule, 0, delta_step, &mut bindings, &mut out);
        out
    }
}

/// Computes the minimal model of `program` over its facts plus
/// `extra_facts`, following `choice` for join orders and index placement.
pub fn evaluate(
    program: &Program,
    choice: PlanChoice,
    extra_facts: &[Atom],
) -> Result<(Model, EvaluationMetrics), EngineError> {
    let started = Instant::now();
    let baseline;
    let plan: &EvaluationPlan = match choice {
        PlanChoice::Plan(p) => p,
        PlanChoice::Baseline => {
            baseline = default_policy_plan(program);
            &baseline
        }
    };
    for (&rule_id, _) in &plan.orderings {
        if program.rules.get(rule_id).is_none() {
            return Err(EngineError::PlanMismatch(format!("unknown rule id {}", rule_id)));
        }
    }
    for entry in plan.schema.iter() {
        let pred = program.pred(entry.pred);
        if entry.arg < 1 || entry.arg > pred.arity {
            return Err(EngineError::PlanMismatch(format!(
                "schema entry {}[{}] out of range",
                pred.name, entry.arg
            )));
        }
    }

    let mut compiled = Vec::with_capacity(program.rules.len());
    for rule in &program.rules {
        compiled.push(compile_rule(rule, plan.ordering(rule.id))?);
    }

    let mut engine = Engine::new(program, &plan.schema);
    for fact in program.facts.iter().chain(extra_facts) {
        let tuple: Tuple = fact
            .terms
            .iter()
            .map(|t| match t {
                Term::Constant(c) => c.clone(),
                Term::Variable(_) => unreachable!("facts are ground"),
            })
            .collect();
        engine.relations[fact.predicate.index()].insert(tuple);
    }

    let strata = program.stratify()?;
    for stratum in strata {
        let members: HashSet<PredId> = stratum.iter().copied().collect();
        let mut rules: Vec<CompiledRule> = compiled
            .iter()
            .filter(|r| members.contains(&r.head_pred))
            .cloned()
            .collect();
        if rules.is_empty() {
            continue;
        }
        for rule in &mut rules {
            for step in &mut rule.steps {
                step.in_stratum = members.contains(&step.pred);
            }
        }

        // Seeding pass: every rule once over the full current database.
        let zeros = vec![(0usize, 0usize); engine.relations.len()];
        engine.caps = engine.snapshot_caps(&members, &zeros);
        for rule in &rules {
            let derived = engine.run_rule(rule, None);
            for (pred, tuple) in derived {
                engine.relations[pred.index()].insert(tuple);
            }
        }

        // Semi-naive rounds: join deltas only.
        loop {
            let previous = engine.caps.clone();
            engine.caps = engine.snapshot_caps(&members, &previous);
            let mut any_delta = false;
            for &pred in &members {
                let (old, full) = engine.caps[pred.index()];
                if old < full {
                    any_delta = true;
                }
            }
            if !any_delta {
                break;
            }
            for rule in &rules {
                let delta_steps: Vec<usize> = rule
                    .steps
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.in_stratum)
                    .map(|(i, _)| i)
                    .collect();
                for d in delta_steps {
                    let derived = engine.run_rule(rule, Some(d));
                    for (pred, tuple) in derived {
                        engine.relations[pred.index()].insert(tuple);
                    }
                }
            }
        }
    }

    let total_index_entries =
        engine.relations.iter().map(|r| r.index_count() * r.len()).sum();
    let metrics = EvaluationMetrics {
        indices_created: engine.indices_created,
        total_index_entries,
        join_iterations: engine.join_iterations,
        derived_tuples: engine.derived_tuples,
        wall_time: started.elapsed(),
    };
    let relations = engine
        .relations
        .into_iter()
        .filter(|r| !r.is_empty())
        .map(|r| (r.pred, r.tuples.into_iter().collect::<BTreeSet<Tuple>>()))
        .collect();
    Ok((Model { relations }, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_program, parse_program_with, Profile};

    fn constants(model: &Model, program: &Program, name: &str) -> Vec<Vec<i64>> {
        let pred = program.pred_id(name).unwrap();
        model
            .relation(pred)
            .map(|rel| {
                rel.iter()
                    .map(|t| {
                        t.iter()
                            .map(|c| match c {
                                Constant::Int(n) => *n,
                                other => panic!("unexpected constant {:?}", other),
                            })
                            .collect()
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    #[test]
    fn transitive_closure_three_edges() {
        let program = parse_program(
            "t(X,Y) :- e(X,Y). t(X,Y) :- e(X,Z), t(Z,Y). e(1,2). e(2,3). e(3,4).",
        )
        .unwrap();
        let (model, metrics) = evaluate(&program, PlanChoice::Baseline, &[]).unwrap();
        let t = constants(&model, &program, "t");
        assert_eq!(
            t,
            vec![
                vec![1, 2],
                vec![1, 3],
                vec![1, 4],
                vec![2, 3],
                vec![2, 4],
                vec![3, 4]
            ]
        );
        assert!(metrics.derived_tuples >= 6);
    }

    #[test]
    fn fact_only_program_has_no_joins() {
        let program = parse_program("p(1). p(2). q(3,4).").unwrap();
        let (model, metrics) = evaluate(&program, PlanChoice::Baseline, &[]).unwrap();
        assert_eq!(model.total_atoms(), 3);
        assert_eq!(metrics.join_iterations, 0);
        assert_eq!(metrics.indices_created, 0);
    }

    #[test]
    fn reference_two_rule_program() {
        let program =
            parse_program("h1(X) :- a(X,Y), b(Y). h2(Y) :- a(Y,X). a(1,2). b(2).").unwrap();
        let (model, _) = evaluate(&program, PlanChoice::Baseline, &[]).unwrap();
        assert_eq!(constants(&model, &program, "h1"), vec![vec![1]]);
        assert_eq!(constants(&model, &program, "h2"), vec![vec![1]]);
    }

    #[test]
    fn plan_and_baseline_agree_on_model() {
        let program = parse_program(
            "t(X,Y) :- e(X,Y). t(X,Y) :- e(X,Z), t(Z,Y). e(1,2). e(2,3). e(3,1). e(4,4).",
        )
        .unwrap();
        let input = crate::plan::PlannerInput::with_defaults(program.clone());
        let optimized = crate::optimizer::optimize(&input).unwrap();
        let (plan_model, _) = evaluate(&program, PlanChoice::Plan(&optimized.plan), &[]).unwrap();
        let (base_model, _) = evaluate(&program, PlanChoice::Baseline, &[]).unwrap();
        assert_eq!(plan_model, base_model);
    }

    #[test]
    fn baseline_running_example_indices() {
        // Regrouped source order a,c,e,b,d binds c[1], e[2] (via Z) and d[1]
        // (via V); the leading atom of each component gets no index.
        let program =
            parse_program("h(X,Z,W) :- a(X,Z), b(V,W), c(Z), d(V), e(Y,Z).").unwrap();
        let plan = default_policy_plan(&program);
        let tags: BTreeSet<String> = plan
            .schema
            .iter()
            .map(|e| format!("{}[{}]", program.pred(e.pred).name, e.arg))
            .collect();
        let want: BTreeSet<String> =
            ["c[1]", "d[1]", "e[2]"].iter().map(|s| s.to_string()).collect();
        assert_eq!(tags, want);
        assert_eq!(plan.ordering(0).unwrap().sequence(), &[1, 4, 2, 5, 3]);
    }

    #[test]
    fn baseline_single_atom_rules_have_no_indices() {
        let program = parse_program("p(X) :- e(X). q(Y) :- f(Y,Y).").unwrap();
        let plan = default_policy_plan(&program);
        assert!(plan.schema.is_empty());
    }

    #[test]
    fn indices_exist_only_where_the_schema_allows() {
        let program = parse_program(
            "h(X) :- big(X,Y), small(Y). big(1,10). big(2,10). big(3,11). small(10). small(11).",
        )
        .unwrap();
        let small = program.pred_id("small").unwrap();
        let plan = EvaluationPlan {
            schema: IndexingSchema::from_entries([ArgRef::new(small, 1)]),
            orderings: BTreeMap::from([(0, Ordering::source_order(0, 2))]),
        };
        let (_, metrics) = evaluate(&program, PlanChoice::Plan(&plan), &[]).unwrap();
        assert_eq!(metrics.indices_created, 1);
        // The one index holds small's two tuples.
        assert_eq!(metrics.total_index_entries, 2);
    }

    #[test]
    fn unused_schema_entries_create_no_index() {
        // Schema allows big[2], but big is first in the join: it is scanned,
        // so the index is never built.
        let program =
            parse_program("h(X) :- big(X,Y), small(Y). big(1,10). small(10).").unwrap();
        let big = program.pred_id("big").unwrap();
        let small = program.pred_id("small").unwrap();
        let plan = EvaluationPlan {
            schema: IndexingSchema::from_entries([
                ArgRef::new(big, 2),
                ArgRef::new(small, 1),
            ]),
            orderings: BTreeMap::from([(0, Ordering::source_order(0, 2))]),
        };
        let (_, metrics) = evaluate(&program, PlanChoice::Plan(&plan), &[]).unwrap();
        assert_eq!(metrics.indices_created, 1);
        assert!(metrics.indices_created <= plan.schema.len());
    }

    #[test]
    fn stratified_negation_membership_test() {
        let program = parse_program_with(
            "only(X) :- d(X), not q(X). q(X) :- e(X). d(1). d(2). d(3). e(2).",
            Profile::Full,
        )
        .unwrap();
        let (model, _) = evaluate(&program, PlanChoice::Baseline, &[]).unwrap();
        assert_eq!(constants(&model, &program, "only"), vec![vec![1], vec![3]]);
    }

    #[test]
    fn plan_mismatch_reported() {
        let program = parse_program("h(X) :- a(X,Y), b(Y).").unwrap();
        let plan = EvaluationPlan {
            schema: IndexingSchema::new(),
            orderings: BTreeMap::from([(7, Ordering::source_order(7, 2))]),
        };
        match evaluate(&program, PlanChoice::Plan(&plan), &[]) {
            Err(EngineError::PlanMismatch(msg)) => assert!(msg.contains("7")),
            other => panic!("expected plan mismatch, got {:?}", other),
        }
    }

    #[test]
    fn repeated_variables_filter_within_one_atom() {
        let program = parse_program("loop(X) :- e(X,X). e(1,1). e(1,2). e(3,3).").unwrap();
        let (model, _) = evaluate(&program, PlanChoice::Baseline, &[]).unwrap();
        assert_eq!(constants(&model, &program, "loop"), vec![vec![1], vec![3]]);
    }

    #[test]
    fn extra_facts_participate() {
        let program = parse_program("h(X) :- a(X,Y), b(Y).").unwrap();
        let a = program.pred_id("a").unwrap();
        let b = program.pred_id("b").unwrap();
        let int = |n| Term::Constant(Constant::Int(n));
        let extra = vec![
            Atom { predicate: a, terms: vec![int(5), int(6)] },
            Atom { predicate: b, terms: vec![int(6)] },
        ];
        let (model, _) = evaluate(&program, PlanChoice::Baseline, &extra).unwrap();
        assert_eq!(constants(&model, &program, "h"), vec![vec![5]]);
    }
}
