//! Exact search for optimal evaluation plans.
//!
//! [`optimize`] runs a branch-and-bound over the schema lattice (subsets of
//! the indexable arguments containing the fixed indices). Rules interact
//! only through the shared schema, so for a fixed schema each rule's
//! ordering is optimized independently by a backtracking search that prunes
//! on admissibility violations as soon as an atom is placed.
//!
//! [`oracle_optimize`] is the verification oracle: it literally enumerates
//! every schema and every ordering tuple, filters with
//! [`is_admissible`](crate::admissibility::is_admissible), and scores with
//! [`cost_vector`](crate::cost::cost_vector). It exists to certify the
//! optimizer on desk-scale inputs and refuses anything over its budget.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::admissibility::{components, is_admissible, ComponentPartition};
use crate::ast::{PredId, Rule, Term};
use crate::cost::{self, CostError, CostFn, CostVector, Preference};
use crate::plan::{
    all_orderings, indexable_arguments, ArgRef, EvaluationPlan, IndexingSchema, Ordering,
    PlannerInput, PositionAssignment,
};
use crate::program::Program;

pub const DEFAULT_ORACLE_BUDGET: u64 = 10_000_000;

/// An optimal plan together with its cost vector.
#[derive(Debug, Clone)]
pub struct Optimized {
    pub plan: EvaluationPlan,
    pub cost: CostVector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OptimizeError {
    /// No admissible plan exists; `rule` is the first rule that has no
    /// admissible ordering even under the maximal schema.
    Unsat { rule: usize },
    Cost(CostError),
}

impl fmt::Display for OptimizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimizeError::Unsat { rule } => write!(
                f,
                "no admissible plan: rule {} has no admissible ordering under the maximal schema",
                rule
            ),
            OptimizeError::Cost(e) => write!(f, "{}", e),
        }
    }
}

impl std::error::Error for OptimizeError {}

impl From<CostError> for OptimizeError {
    fn from(e: CostError) -> Self {
        OptimizeError::Cost(e)
    }
}

/// All optimal plans found by exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub optimal: Vec<EvaluationPlan>,
    pub cost: CostVector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    /// The search space exceeds the budget; the oracle is desk-scale only.
    BudgetExceeded { required: u128, budget: u64 },
    Unsat { rule: usize },
    Cost(CostError),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::BudgetExceeded { required, budget } => write!(
                f,
                "oracle budget exceeded: {} plans to enumerate, budget {}",
                required, budget
            ),
            OracleError::Unsat { rule } => write!(
                f,
                "no admissible plan: rule {} has no admissible ordering under the maximal schema",
                rule
            ),
            OracleError::Cost(e) => write!(f, "{}", e),
        }
    }
}

impl std::error::Error for OracleError {}

struct RuleCtx<'a> {
    rule: &'a Rule,
    partition: ComponentPartition,
    assignment: PositionAssignment,
    /// Argument refs that can matter for this rule's admissibility:
    /// every (pred, arg) of its body atoms.
    relevant: BTreeSet<ArgRef>,
}

struct Ctx<'a> {
    input: &'a PlannerInput,
    program: &'a Program,
    rules: Vec<RuleCtx<'a>>,
    recursive: BTreeSet<PredId>,
    max_arity: usize,
    /// Ordering-dependent cost functions of the strategy, in strategy order.
    rule_fns: Vec<CostFn>,
    fixed: BTreeSet<ArgRef>,
    candidates: Vec<ArgRef>,
}

impl<'a> Ctx<'a> {
    fn new(input: &'a PlannerInput) -> Self {
        let program = input.program();
        let rules: Vec<RuleCtx> = program
            .planner_rules()
            .into_iter()
            .map(|rule| {
                let relevant = rule
                    .body
                    .iter()
                    .flat_map(|l| {
                        (1..=l.atom.terms.len()).map(move |i| ArgRef::new(l.atom.predicate, i))
                    })
                    .collect();
                RuleCtx {
                    rule,
                    partition: components(rule),
                    assignment: input.assignment(rule.id).cloned().unwrap_or_default(),
                    relevant,
                }
            })
            .collect();
        let rule_fns = input
            .strategy()
            .sequence()
            .iter()
            .copied()
            .filter(|f| matches!(f, CostFn::W2 | CostFn::W4))
            .collect();
        let fixed = input.fixed_indices().clone();
        let candidates = indexable_arguments(program)
            .into_iter()
            .filter(|e| !fixed.contains(e))
            .collect();
        Ctx {
            input,
            program,
            rules,
            recursive: program.recursive_predicates(),
            max_arity: cost::max_arity(program),
            rule_fns,
            fixed,
            candidates,
        }
    }

    fn schema_of(&self, entries: &BTreeSet<ArgRef>) -> IndexingSchema {
        IndexingSchema::from_entries(entries.iter().copied())
    }
}

/// Per-rule backtracking search: among the orderings extending the rule's
/// position assignment that are admissible w.r.t. `schema`, returns the one
/// minimizing the rule's ordering-cost vector (tie: lexicographically
/// smallest position sequence), or `None` if no admissible ordering exists.
fn best_ordering(ctx: &Ctx, rc: &RuleCtx, schema: &BTreeSet<ArgRef>) -> Option<(Vec<u64>, Vec<usize>)> {
    let body: Vec<&crate::ast::Atom> = rc.rule.body.iter().map(|l| &l.atom).collect();
    let n = body.len();
    let comp_of = &rc.partition.component_of;
    let comp_count = rc.partition.components.len();
    let comp_sizes: Vec<usize> = rc.partition.components.iter().map(Vec::len).collect();

    let mut pinned_at: Vec<Option<usize>> = vec![None; n + 1];
    let mut pin_of: Vec<Option<usize>> = vec![None; n];
    for (body_idx, pos) in rc.assignment.iter() {
        pinned_at[pos] = Some(body_idx);
        pin_of[body_idx] = Some(pos);
    }

    struct Search<'s> {
        body: &'s [&'s crate::ast::Atom],
        schema: &'s BTreeSet<ArgRef>,
        comp_of: &'s [usize],
        recursive: &'s BTreeSet<PredId>,
        max_arity: usize,
        rule_fns: &'s [CostFn],
        pinned_at: &'s [Option<usize>],
        pin_of: &'s [Option<usize>],
        placed: Vec<usize>,        // body idx -> position, 0 = unplaced
        seen: HashMap<String, usize>, // variable -> number of placed atoms containing it
        comp_remaining: Vec<usize>,
        comp_started: Vec<bool>,
        open: Option<usize>,
        partial: Vec<u64>,
        best: Option<(Vec<u64>, Vec<usize>)>,
    }

    impl Search<'_> {
        fn var_bound(&self, v: &str) -> bool {
            self.seen.get(v).copied().unwrap_or(0) > 0
        }

        fn fully_bound_here(&self, body_idx: usize) -> bool {
            self.body[body_idx].terms.iter().all(|t| match t {
                Term::Constant(_) => true,
                Term::Variable(v) => self.var_bound(v),
            })
        }

        fn recurse(&mut self, position: usize) {
            let n = self.body.len();
            if position > n {
                let candidate = (self.partial.clone(), self.placed.clone());
                let better = match &self.best {
                    None => true,
                    Some(best) => candidate < *best,
                };
                if better {
                    self.best = Some(candidate);
                }
                return;
            }
            let candidates: Vec<usize> = match self.pinned_at[position] {
                Some(b) => vec![b],
                None => (0..n)
                    .filter(|&b| self.placed[b] == 0 && self.pin_of[b].is_none())
                    .collect(),
            };
            for b in candidates {
                let comp = self.comp_of[b];
                // Separation: stay inside the open component; never re-enter
                // a finished one.
                match self.open {
                    Some(oc) if oc != comp => continue,
                    None if self.comp_started[comp] => continue,
                    _ => {}
                }
                let atom = self.body[b];
                let arity = atom.terms.len();
                let mut bound = 0usize;
                let mut index_bound = false;
                for (i, term) in atom.terms.iter().enumerate() {
                    let is_bound = match term {
                        Term::Constant(_) => true,
                        Term::Variable(v) => self.var_bound(v),
                    };
                    if is_bound {
                        bound += 1;
                        if self.schema.contains(&ArgRef::new(atom.predicate, i + 1)) {
                            index_bound = true;
                        }
                    }
                }
                // Well-ordering applies only past the component's first
                // atom: (i) an indexBound argument must exist, and (ii) an
                // unbound atom must not preempt an atom that would be fully
                // bound at this position.
                if self.comp_started[comp] && !index_bound {
                    continue;
                }
                if self.comp_started[comp] && bound < arity {
                    let preempted = (0..n).any(|g| {
                        g != b
                            && self.placed[g] == 0
                            && self.comp_of[g] == comp
                            && self.fully_bound_here(g)
                    });
                    if preempted {
                        continue;
                    }
                }
                // Cost terms for this placement.
                let mut terms = Vec::with_capacity(self.rule_fns.len());
                for f in self.rule_fns {
                    let t = match f {
                        CostFn::W2 => {
                            if self.recursive.contains(&atom.predicate) {
                                position as u64
                            } else {
                                0
                            }
                        }
                        CostFn::W4 => ((self.max_arity - (arity - bound)) * position) as u64,
                        _ => unreachable!("rule_fns holds only W2/W4"),
                    };
                    terms.push(t);
                }
                for (acc, t) in self.partial.iter_mut().zip(&terms) {
                    *acc += t;
                }
                let dominated = match &self.best {
                    Some((best_cost, _)) => self.partial > *best_cost,
                    None => false,
                };
                if !dominated {
                    self.placed[b] = position;
                    for v in atom.variables() {
                        *self.seen.entry(v.to_string()).or_insert(0) += 1;
                    }
                    let was_open = self.open;
                    let was_started = self.comp_started[comp];
                    self.comp_started[comp] = true;
                    self.comp_remaining[comp] -= 1;
                    self.open = if self.comp_remaining[comp] == 0 { None } else { Some(comp) };

                    self.recurse(position + 1);

                    self.open = was_open;
                    self.comp_remaining[comp] += 1;
                    self.comp_started[comp] = was_started;
                    for v in atom.variables() {
                        *self.seen.get_mut(v).unwrap() -= 1;
                    }
                    self.placed[b] = 0;
                }
                for (acc, t) in self.partial.iter_mut().zip(&terms) {
                    *acc -= t;
                }
            }
        }
    }

    let mut search = Search {
        body: &body,
        schema,
        comp_of,
        recursive: &ctx.recursive,
        max_arity: ctx.max_arity,
        rule_fns: &ctx.rule_fns,
        pinned_at: &pinned_at,
        pin_of: &pin_of,
        placed: vec![0; n],
        seen: HashMap::new(),
        comp_remaining: comp_sizes,
        comp_started: vec![false; comp_count],
        open: None,
        partial: vec![0; ctx.rule_fns.len()],
        best: None,
    };
    let _ = comp_count;
    search.recurse(1);
    search.best
}

/// Memoized per-rule search, keyed by the schema projected onto the rule's
/// relevant arguments.
struct RuleSearchCache {
    cache: HashMap<(usize, Vec<ArgRef>), Option<(Vec<u64>, Vec<usize>)>>,
}

impl RuleSearchCache {
    fn new() -> Self {
        RuleSearchCache { cache: HashMap::new() }
    }

    fn best(
        &mut self,
        ctx: &Ctx,
        rule_idx: usize,
        schema: &BTreeSet<ArgRef>,
    ) -> Option<(Vec<u64>, Vec<usize>)> {
        let rc = &ctx.rules[rule_idx];
        let projected: Vec<ArgRef> =
            schema.iter().copied().filter(|e| rc.relevant.contains(e)).collect();
        if let Some(hit) = self.cache.get(&(rule_idx, projected.clone())) {
            return hit.clone();
        }
        let projected_set: BTreeSet<ArgRef> = projected.iter().copied().collect();
        let result = best_ordering(ctx, rc, &projected_set);
        self.cache.insert((rule_idx, projected), result.clone());
        result
    }
}

#[derive(Clone)]
struct Candidate {
    vector: Vec<u64>,
    schema: BTreeSet<ArgRef>,
    orderings: Vec<Vec<usize>>, // per eligible rule, position sequences
}

/// Deterministic tie-break among cost-equivalent plans: smaller schema
/// first, then lexicographic on (name, arity, arg) entry lists, then on
/// per-rule position sequences in rule-id order.
fn tie_break_better(new: &Candidate, old: &Candidate, program: &Program) -> bool {
    let key = |c: &Candidate| {
        let entries: Vec<(String, usize, usize)> = c
            .schema
            .iter()
            .map(|e| {
                let p = program.pred(e.pred);
                (p.name.clone(), p.arity, e.arg)
            })
            .collect();
        (c.schema.len(), entries)
    };
    match key(new).cmp(&key(old)) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => new.orderings < old.orderings,
    }
}

fn assemble_vector(
    ctx: &Ctx,
    schema: &BTreeSet<ArgRef>,
    rule_costs: &[Vec<u64>],
) -> Result<Vec<u64>, CostError> {
    let mut rule_fn_idx = 0usize;
    let mut out = Vec::with_capacity(ctx.input.strategy().len());
    for f in ctx.input.strategy().sequence() {
        let v = match f {
            CostFn::W1 => {
                let mut total = 0u64;
                for &entry in schema {
                    total += ctx.input.cost(entry).ok_or_else(|| CostError::MissingCost {
                        tag: ctx.program.pred(entry.pred).tag(),
                        arg: entry.arg,
                    })?;
                }
                total
            }
            CostFn::W3 => {
                schema.iter().filter(|e| !ctx.input.keys().contains(e)).count() as u64
            }
            CostFn::W2 | CostFn::W4 => {
                let i = rule_fn_idx;
                rule_fn_idx += 1;
                rule_costs.iter().map(|rc| rc[i]).sum()
            }
        };
        out.push(v);
    }
    Ok(out)
}

/// Lower bound for any completion of a partial schema choice: schema costs
/// from what is already included (they only grow), ordering costs from the
/// largest still-reachable schema (they only shrink as the schema shrinks).
fn lower_bound(
    ctx: &Ctx,
    included: &BTreeSet<ArgRef>,
    upper_rule_costs: &[Vec<u64>],
) -> Vec<u64> {
    let mut rule_fn_idx = 0usize;
    let mut out = Vec::with_capacity(ctx.input.strategy().len());
    for f in ctx.input.strategy().sequence() {
        let v = match f {
            CostFn::W1 => included.iter().map(|e| ctx.input.cost(*e).unwrap_or(0)).sum(),
            CostFn::W3 => {
                included.iter().filter(|e| !ctx.input.keys().contains(e)).count() as u64
            }
            CostFn::W2 | CostFn::W4 => {
                let i = rule_fn_idx;
                rule_fn_idx += 1;
                upper_rule_costs.iter().map(|rc| rc[i]).sum()
            }
        };
        out.push(v);
    }
    out
}

/// Finds an optimal plan: admissible, wellformed, and with no admissible
/// plan carrying a preferable cost vector. Ties are broken deterministically
/// so equal inputs always yield byte-identical plan files.
pub fn optimize(input: &PlannerInput) -> Result<Optimized, OptimizeError> {
    let ctx = Ctx::new(input);
    let mut cache = RuleSearchCache::new();

    // Feasibility under the maximal schema; also the UNSAT witness.
    let mut smax: BTreeSet<ArgRef> = ctx.fixed.clone();
    smax.extend(ctx.candidates.iter().copied());
    for (i, rc) in ctx.rules.iter().enumerate() {
        if cache.best(&ctx, i, &smax).is_none() {
            return Err(OptimizeError::Unsat { rule: rc.rule.id });
        }
    }

    struct Dfs<'c, 'a> {
        ctx: &'c Ctx<'a>,
        cache: &'c mut RuleSearchCache,
        best: Option<Candidate>,
        error: Option<CostError>,
    }

    impl Dfs<'_, '_> {
        fn leaf(&mut self, schema: &BTreeSet<ArgRef>) {
            let mut rule_costs = Vec::with_capacity(self.ctx.rules.len());
            let mut orderings = Vec::with_capacity(self.ctx.rules.len());
            for i in 0..self.ctx.rules.len() {
                match self.cache.best(self.ctx, i, schema) {
                    None => return, // infeasible schema
                    Some((costs, seq)) => {
                        rule_costs.push(costs);
                        orderings.push(seq);
                    }
                }
            }
            let vector = match assemble_vector(self.ctx, schema, &rule_costs) {
                Ok(v) => v,
                Err(e) => {
                    self.error.get_or_insert(e);
                    return;
                }
            };
            let candidate = Candidate { vector, schema: schema.clone(), orderings };
            let replace = match &self.best {
                None => true,
                Some(best) => match candidate.vector.cmp(&best.vector) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Greater => false,
                    std::cmp::Ordering::Equal => {
                        tie_break_better(&candidate, best, self.ctx.program)
                    }
                },
            };
            if replace {
                self.best = Some(candidate);
            }
        }

        fn walk(&mut self, next: usize, included: &mut BTreeSet<ArgRef>) {
            if next == self.ctx.candidates.len() {
                self.leaf(included);
                return;
            }
            // Bound and feasibility against the largest schema reachable
            // from here.
            let mut upper = included.clone();
            upper.extend(self.ctx.candidates[next..].iter().copied());
            let mut upper_rule_costs = Vec::with_capacity(self.ctx.rules.len());
            for i in 0..self.ctx.rules.len() {
                match self.cache.best(self.ctx, i, &upper) {
                    None => return, // no subset of `upper` can be feasible
                    Some((costs, _)) => upper_rule_costs.push(costs),
                }
            }
            if let Some(best) = &self.best {
                let bound = lower_bound(self.ctx, included, &upper_rule_costs);
                if bound > best.vector {
                    return;
                }
            }
            self.walk(next + 1, included);
            let entry = self.ctx.candidates[next];
            included.insert(entry);
            self.walk(next + 1, included);
            included.remove(&entry);
        }
    }

    let mut dfs = Dfs { ctx: &ctx, cache: &mut cache, best: None, error: None };
    let mut included = ctx.fixed.clone();
    dfs.walk(0, &mut included);
    if let Some(e) = dfs.error {
        return Err(e.into());
    }
    let best = dfs.best.ok_or(OptimizeError::Unsat {
        rule: ctx.rules.first().map(|rc| rc.rule.id).unwrap_or(0),
    })?;

    let mut orderings = BTreeMap::new();
    for (rc, seq) in ctx.rules.iter().zip(&best.orderings) {
        orderings.insert(
            rc.rule.id,
            Ordering::new(rc.rule.id, seq.clone()).expect("search yields bijections"),
        );
    }
    let plan = EvaluationPlan { schema: ctx.schema_of(&best.schema), orderings };
    let cost = cost::cost_vector(&plan, input)?;
    Ok(Optimized { plan, cost })
}

/// Exhaustively enumerates every plan in the search space and returns all
/// optimal ones. The workload is `2^|indexable \ I|` schemas times the
/// product of `(|B(r)| - |fixed|)!` ordering counts; anything beyond
/// `budget` is refused.
pub fn oracle_optimize(input: &PlannerInput, budget: u64) -> Result<OracleOutcome, OracleError> {
    let ctx = Ctx::new(input);
    let factorial = |n: usize| -> u128 { (1..=n as u128).product::<u128>().max(1) };
    let mut required: u128 = 1;
    for rc in &ctx.rules {
        required = required.saturating_mul(factorial(rc.rule.body.len() - rc.assignment.len()));
    }
    required = required.saturating_mul(
        1u128.checked_shl(ctx.candidates.len() as u32).unwrap_or(u128::MAX),
    );
    if required > budget as u128 {
        return Err(OracleError::BudgetExceeded { required, budget });
    }

    // All orderings per rule, fixed positions honored.
    let rule_orderings: Vec<Vec<Ordering>> = ctx
        .rules
        .iter()
        .map(|rc| all_orderings(rc.rule.id, rc.rule.body.len(), &rc.assignment))
        .collect();

    let mut best_cost: Option<CostVector> = None;
    let mut optimal: Vec<EvaluationPlan> = Vec::new();
    let mut any_admissible_per_rule = vec![false; ctx.rules.len()];

    for mask in 0u64..(1u64 << ctx.candidates.len()) {
        let mut entries = ctx.fixed.clone();
        for (i, e) in ctx.candidates.iter().enumerate() {
            if mask & (1 << i) != 0 {
                entries.insert(*e);
            }
        }
        let schema = ctx.schema_of(&entries);
        let full_mask = mask == (1u64 << ctx.candidates.len()) - 1;

        // Cross product of ordering choices, literal admissibility filter.
        let mut stack: Vec<usize> = Vec::new();
        enumerate_tuples(&rule_orderings, 0, &mut stack, &mut |choice| {
            if full_mask {
                for (i, rc) in ctx.rules.iter().enumerate() {
                    if is_admissible(rc.rule, &rule_orderings[i][choice[i]], &schema).is_ok() {
                        any_admissible_per_rule[i] = true;
                    }
                }
            }
            let admissible = ctx.rules.iter().enumerate().all(|(i, rc)| {
                is_admissible(rc.rule, &rule_orderings[i][choice[i]], &schema).is_ok()
            });
            if !admissible {
                return Ok(());
            }
            let plan = EvaluationPlan {
                schema: schema.clone(),
                orderings: ctx
                    .rules
                    .iter()
                    .enumerate()
                    .map(|(i, rc)| (rc.rule.id, rule_orderings[i][choice[i]].clone()))
                    .collect(),
            };
            let vector = cost::cost_vector(&plan, input).map_err(OracleError::Cost)?;
            match &best_cost {
                None => {
                    best_cost = Some(vector);
                    optimal.push(plan);
                }
                Some(best) => match cost::compare(&vector, best).expect("same strategy") {
                    Preference::Preferable => {
                        best_cost = Some(vector);
                        optimal.clear();
                        optimal.push(plan);
                    }
                    Preference::Equivalent => optimal.push(plan),
                    Preference::Dispreferred => {}
                },
            }
            Ok(())
        })?;
    }

    match best_cost {
        Some(cost) => Ok(OracleOutcome { optimal, cost }),
        None => {
            let rule = ctx
                .rules
                .iter()
                .zip(&any_admissible_per_rule)
                .find(|(_, &ok)| !ok)
                .map(|(rc, _)| rc.rule.id)
                .unwrap_or_else(|| ctx.rules.first().map(|rc| rc.rule.id).unwrap_or(0));
            Err(OracleError::Unsat { rule })
        }
    }
}

fn enumerate_tuples(
    rule_orderings: &[Vec<Ordering>],
    rule_idx: usize,
    stack: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]) -> Result<(), OracleError>,
) -> Result<(), OracleError> {
    if rule_idx == rule_orderings.len() {
        return visit(stack);
    }
    for i in 0..rule_orderings[rule_idx].len() {
        stack.push(i);
        enumerate_tuples(rule_orderings, rule_idx + 1, stack, visit)?;
        stack.pop();
    }
    Ok(())
}

/// The deterministic representative among cost-equivalent plans, by the same
/// tie-break the optimizer uses: smallest schema, then schema entries by
/// (name, arity, arg), then position sequences in rule-id order.
pub fn select_representative<'a>(
    plans: &'a [EvaluationPlan],
    program: &Program,
) -> Option<&'a EvaluationPlan> {
    fn key(plan: &EvaluationPlan, program: &Program) -> (usize, Vec<(String, usize, usize)>, Vec<(usize, Vec<usize>)>) {
        let entries = plan
            .schema
            .sorted_entries(program)
            .into_iter()
            .map(|e| {
                let p = program.pred(e.pred);
                (p.name.clone(), p.arity, e.arg)
            })
            .collect();
        let orderings = plan
            .orderings
            .iter()
            .map(|(&r, o)| (r, o.sequence().to_vec()))
            .collect();
        (plan.schema.len(), entries, orderings)
    }
    plans.iter().min_by_key(|p| key(p, program))
}
