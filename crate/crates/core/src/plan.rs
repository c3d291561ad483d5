//! Evaluation plans: indexing schemas, body orderings, planner inputs, and
//! the plan interchange file format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ast::{PredId, Rule, Term};
use crate::cost::Strategy;
use crate::program::Program;

/// One indexable argument position: predicate plus 1-based argument index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArgRef {
    pub pred: PredId,
    pub arg: usize,
}

impl ArgRef {
    pub fn new(pred: PredId, arg: usize) -> Self {
        ArgRef { pred, arg }
    }

    /// Rendering like `c[1]`, used in diagnostics.
    pub fn display(&self, program: &Program) -> String {
        format!("{}[{}]", program.pred(self.pred).name, self.arg)
    }

    /// Sort key ordering entries by predicate name, arity, then argument.
    pub fn sort_key<'p>(&self, program: &'p Program) -> (&'p str, usize, usize) {
        let p = program.pred(self.pred);
        (&p.name, p.arity, self.arg)
    }
}

/// The set of argument positions that carry a point-lookup index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexingSchema {
    entries: BTreeSet<ArgRef>,
}

impl IndexingSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = ArgRef>) -> Self {
        IndexingSchema { entries: entries.into_iter().collect() }
    }

    pub fn insert(&mut self, entry: ArgRef) {
        self.entries.insert(entry);
    }

    pub fn contains(&self, entry: ArgRef) -> bool {
        self.entries.contains(&entry)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ArgRef> + '_ {
        self.entries.iter().copied()
    }

    /// `true` iff every entry of `fixed` is in the schema (Def.: "fixes I").
    pub fn fixes(&self, fixed: &BTreeSet<ArgRef>) -> bool {
        fixed.iter().all(|e| self.entries.contains(e))
    }

    /// Entries sorted by predicate name, arity, then argument.
    pub fn sorted_entries(&self, program: &Program) -> Vec<ArgRef> {
        let mut v: Vec<ArgRef> = self.entries.iter().copied().collect();
        v.sort_by(|a, b| a.sort_key(program).cmp(&b.sort_key(program)));
        v
    }
}

/// A partial, injective assignment of body atoms to positions, used to pin
/// atoms (e.g. magic atoms) before planning.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PositionAssignment {
    /// body index -> 1-based position
    fixed: BTreeMap<usize, usize>,
}

impl PositionAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pin; errors on duplicate atoms, duplicate positions, or
    /// out-of-range values for a body of `body_len` atoms.
    pub fn fix(&mut self, body_idx: usize, position: usize, body_len: usize) -> Result<(), String> {
        if body_idx >= body_len {
            return Err(format!("body atom index {} out of range (body has {} atoms)", body_idx, body_len));
        }
        if position < 1 || position > body_len {
            return Err(format!("position {} out of range 1..={}", position, body_len));
        }
        if self.fixed.contains_key(&body_idx) {
            return Err(format!("body atom {} already has a fixed position", body_idx));
        }
        if self.fixed.values().any(|&p| p == position) {
            return Err(format!("position {} fixed twice", position));
        }
        self.fixed.insert(body_idx, position);
        Ok(())
    }

    pub fn position_of(&self, body_idx: usize) -> Option<usize> {
        self.fixed.get(&body_idx).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.fixed.iter().map(|(&b, &p)| (b, p))
    }

    pub fn len(&self) -> usize {
        self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }
}

/// A total body ordering for one rule: a bijection between body atoms and
/// positions `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    pub rule: usize,
    /// `positions[body_idx]` is the 1-based position of that atom.
    positions: Vec<usize>,
}

impl Ordering {
    /// Builds an ordering, checking bijectivity onto `1..=n`.
    pub fn new(rule: usize, positions: Vec<usize>) -> Result<Self, String> {
        let n = positions.len();
        let mut seen = vec![false; n + 1];
        for &p in &positions {
            if p < 1 || p > n {
                return Err(format!("position {} out of range 1..={}", p, n));
            }
            if seen[p] {
                return Err(format!("duplicate position {}", p));
            }
            seen[p] = true;
        }
        Ok(Ordering { rule, positions })
    }

    /// The identity ordering (source order).
    pub fn source_order(rule: usize, body_len: usize) -> Self {
        Ordering { rule, positions: (1..=body_len).collect() }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// 1-based position of the atom at `body_idx`.
    pub fn position_of(&self, body_idx: usize) -> usize {
        self.positions[body_idx]
    }

    /// Position sequence in source-body order; the tie-break key.
    pub fn sequence(&self) -> &[usize] {
        &self.positions
    }

    /// Body indices sorted by position, i.e. join order.
    pub fn by_position(&self) -> Vec<usize> {
        let mut order = vec![0usize; self.positions.len()];
        for (body_idx, &pos) in self.positions.iter().enumerate() {
            order[pos - 1] = body_idx;
        }
        order
    }

    pub fn extends(&self, assignment: &PositionAssignment) -> bool {
        assignment.iter().all(|(b, p)| self.positions.get(b) == Some(&p))
    }
}

/// All orderings of a body of `body_len` atoms extending `fixed`; there are
/// exactly `(body_len - |fixed|)!` of them. Emitted in lexicographic order
/// of the position sequence.
pub fn all_orderings(rule: usize, body_len: usize, fixed: &PositionAssignment) -> Vec<Ordering> {
    let mut positions = vec![0usize; body_len];
    let mut taken = vec![false; body_len + 1];
    for (b, p) in fixed.iter() {
        positions[b] = p;
        taken[p] = true;
    }
    let mut out = Vec::new();
    fill(0, &mut positions, &mut taken, fixed, rule, &mut out);
    return out;

    fn fill(
        body_idx: usize,
        positions: &mut Vec<usize>,
        taken: &mut Vec<bool>,
        fixed: &PositionAssignment,
        rule: usize,
        out: &mut Vec<Ordering>,
    ) {
        if body_idx == positions.len() {
            out.push(Ordering { rule, positions: positions.clone() });
            return;
        }
        if fixed.position_of(body_idx).is_some() {
            fill(body_idx + 1, positions, taken, fixed, rule, out);
            return;
        }
        for p in 1..=positions.len() {
            if !taken[p] {
                taken[p] = true;
                positions[body_idx] = p;
                fill(body_idx + 1, positions, taken, fixed, rule, out);
                positions[body_idx] = 0;
                taken[p] = false;
            }
        }
    }
}

/// A complete evaluation plan: one schema plus one ordering per planned rule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvaluationPlan {
    pub schema: IndexingSchema,
    pub orderings: BTreeMap<usize, Ordering>,
}

impl EvaluationPlan {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn ordering(&self, rule: usize) -> Option<&Ordering> {
        self.orderings.get(&rule)
    }
}

/// Everything the optimizer consumes: program, pinned positions and indices,
/// keys, the index cost table, and the strategy.
#[derive(Debug, Clone)]
pub struct PlannerInput {
    program: Program,
    assignments: BTreeMap<usize, PositionAssignment>,
    fixed_indices: BTreeSet<ArgRef>,
    keys: BTreeSet<ArgRef>,
    index_costs: BTreeMap<ArgRef, u64>,
    strategy: Strategy,
}

impl PlannerInput {
    pub fn builder(program: Program) -> PlannerInputBuilder {
        PlannerInputBuilder {
            program,
            assignments: BTreeMap::new(),
            fixed_indices: BTreeSet::new(),
            keys: BTreeSet::new(),
            index_costs: BTreeMap::new(),
            strategy: Strategy::sigma2(),
            idb_default_cost: PlannerInputBuilder::DEFAULT_IDB_COST,
        }
    }

    /// A ready input with defaults everywhere: no pins, no keys, default
    /// costs, strategy `sigma2`.
    pub fn with_defaults(program: Program) -> Self {
        Self::builder(program).build().expect("defaults are always valid")
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn assignment(&self, rule: usize) -> Option<&PositionAssignment> {
        self.assignments.get(&rule)
    }

    pub fn fixed_indices(&self) -> &BTreeSet<ArgRef> {
        &self.fixed_indices
    }

    pub fn keys(&self) -> &BTreeSet<ArgRef> {
        &self.keys
    }

    pub fn cost(&self, entry: ArgRef) -> Option<u64> {
        self.index_costs.get(&entry).copied()
    }

    pub fn index_costs(&self) -> &BTreeMap<ArgRef, u64> {
        &self.index_costs
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }
}

/// Builder for [`PlannerInput`]; `build` validates every reference and fills
/// cost defaults so the table covers all indexable arguments.
pub struct PlannerInputBuilder {
    program: Program,
    assignments: BTreeMap<usize, PositionAssignment>,
    fixed_indices: BTreeSet<ArgRef>,
    keys: BTreeSet<ArgRef>,
    index_costs: BTreeMap<ArgRef, u64>,
    strategy: Strategy,
    idb_default_cost: u64,
}

impl PlannerInputBuilder {
    pub const DEFAULT_IDB_COST: u64 = 1000;

    /// The program under construction, including relations declared so far.
    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    /// Default index cost for IDB predicates, used when no explicit cost is
    /// supplied (EDB predicates default to their relation size).
    pub fn idb_default_cost(mut self, cost: u64) -> Self {
        self.idb_default_cost = cost;
        self
    }

    pub fn fix_position(mut self, rule: usize, body_idx: usize, position: usize) -> Result<Self, InputError> {
        let body_len = self
            .program
            .rules
            .get(rule)
            .map(|r| r.body.len())
            .ok_or(InputError::UnknownRule(rule))?;
        self.assignments
            .entry(rule)
            .or_default()
            .fix(body_idx, position, body_len)
            .map_err(|detail| InputError::BadFixedPosition { rule, detail })?;
        Ok(self)
    }

    pub fn fix_index(mut self, entry: ArgRef) -> Result<Self, InputError> {
        self.check_arg(entry)?;
        self.fixed_indices.insert(entry);
        Ok(self)
    }

    pub fn key(mut self, entry: ArgRef) -> Result<Self, InputError> {
        self.check_arg(entry)?;
        self.keys.insert(entry);
        Ok(self)
    }

    pub fn cost(mut self, entry: ArgRef, cost: u64) -> Result<Self, InputError> {
        self.check_arg(entry)?;
        self.index_costs.insert(entry, cost);
        Ok(self)
    }

    /// Declares a predicate that only exists in the external database.
    pub fn declare_relation(mut self, name: &str, arity: usize) -> Result<Self, InputError> {
        self.program.declare_predicate(name, arity).map_err(InputError::BadRelation)?;
        Ok(self)
    }

    fn check_arg(&self, entry: ArgRef) -> Result<(), InputError> {
        let pred = self.program.pred(entry.pred);
        if entry.arg < 1 || entry.arg > pred.arity {
            return Err(InputError::BadArgument { tag: pred.tag(), arg: entry.arg });
        }
        Ok(())
    }

    pub fn build(mut self) -> Result<PlannerInput, InputError> {
        // The cost table must cover every argument an index could be set on:
        // indexable arguments plus user-fixed indices.
        let mut relation_sizes: BTreeMap<PredId, usize> = BTreeMap::new();
        {
            let mut seen: BTreeMap<PredId, BTreeSet<&[Term]>> = BTreeMap::new();
            for fact in &self.program.facts {
                seen.entry(fact.predicate).or_default().insert(&fact.terms);
            }
            for (pred, tuples) in seen {
                relation_sizes.insert(pred, tuples.len());
            }
        }
        let mut needed: BTreeSet<ArgRef> = indexable_arguments(&self.program);
        needed.extend(self.fixed_indices.iter().copied());
        for entry in needed {
            self.index_costs.entry(entry).or_insert_with(|| {
                if self.program.pred(entry.pred).is_edb {
                    relation_sizes.get(&entry.pred).copied().unwrap_or(0) as u64
                } else {
                    self.idb_default_cost
                }
            });
        }
        Ok(PlannerInput {
            program: self.program,
            assignments: self.assignments,
            fixed_indices: self.fixed_indices,
            keys: self.keys,
            index_costs: self.index_costs,
            strategy: self.strategy,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputError {
    UnknownRule(usize),
    BadFixedPosition { rule: usize, detail: String },
    BadArgument { tag: String, arg: usize },
    BadRelation(String),
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputError::UnknownRule(id) => write!(f, "unknown rule id {}", id),
            InputError::BadFixedPosition { rule, detail } => {
                write!(f, "invalid fixed position for rule {}: {}", rule, detail)
            }
            InputError::BadArgument { tag, arg } => {
                write!(f, "argument {} out of range for predicate {}", arg, tag)
            }
            InputError::BadRelation(detail) => write!(f, "{}", detail),
        }
    }
}

impl std::error::Error for InputError {}

/// Argument positions on which an index can pay off: positions holding a
/// constant, or a variable that also occurs in another body atom of the same
/// rule or earlier in the same atom. Union over all planner-eligible rules.
pub fn indexable_arguments(program: &Program) -> BTreeSet<ArgRef> {
    let mut out = BTreeSet::new();
    for rule in program.planner_rules() {
        let body: Vec<&crate::ast::Atom> = rule.positive_body().collect();
        for (bi, atom) in body.iter().enumerate() {
            for (i, term) in atom.terms.iter().enumerate() {
                let indexable = match term {
                    Term::Constant(_) => true,
                    Term::Variable(v) => {
                        let in_other_atom = body
                            .iter()
                            .enumerate()
                            .any(|(bj, other)| bj != bi && other.variables().any(|w| w == v));
                        let earlier_in_same = atom.terms[..i]
                            .iter()
                            .any(|t| t.as_variable() == Some(v.as_str()));
                        in_other_atom || earlier_in_same
                    }
                };
                if indexable {
                    out.insert(ArgRef::new(atom.predicate, i + 1));
                }
            }
        }
    }
    out
}

/// Checks the structural side of a plan: bijective orderings covering each
/// planned rule, fixed positions honored, and the schema fixing the input's
/// fixed indices. Returns one diagnostic per violation; empty means
/// wellformed. Admissibility is a separate check.
pub fn wellformedness_diagnostics(plan: &EvaluationPlan, input: &PlannerInput) -> Vec<String> {
    let program = input.program();
    let mut diags = Vec::new();
    let eligible: BTreeMap<usize, &Rule> =
        program.planner_rules().into_iter().map(|r| (r.id, r)).collect();
    for (&rule_id, ordering) in &plan.orderings {
        match eligible.get(&rule_id) {
            None => diags.push(format!("ordering given for unknown or unplanned rule {}", rule_id)),
            Some(rule) => {
                if ordering.len() != rule.body.len() {
                    diags.push(format!(
                        "rule {}: ordering covers {} atoms but the body has {}",
                        rule_id,
                        ordering.len(),
                        rule.body.len()
                    ));
                    continue;
                }
                let mut seen = vec![false; rule.body.len() + 1];
                for (bi, &pos) in ordering.sequence().iter().enumerate() {
                    if pos < 1 || pos > rule.body.len() {
                        diags.push(format!("rule {}: position {} out of range", rule_id, pos));
                    } else if seen[pos] {
                        diags.push(format!("rule {}: duplicate position {}", rule_id, pos));
                    } else {
                        seen[pos] = true;
                    }
                    let _ = bi;
                }
                if let Some(assignment) = input.assignment(rule_id) {
                    for (body_idx, pos) in assignment.iter() {
                        if ordering.position_of(body_idx) != pos {
                            diags.push(format!(
                                "rule {}: fixed position violated (atom {} must be at {})",
                                rule_id, body_idx, pos
                            ));
                        }
                    }
                }
            }
        }
    }
    for (&rule_id, _) in &eligible {
        if !plan.orderings.contains_key(&rule_id) {
            diags.push(format!("rule {}: no ordering in plan", rule_id));
        }
    }
    for entry in plan.schema.iter() {
        let pred = program.pred(entry.pred);
        if entry.arg < 1 || entry.arg > pred.arity {
            diags.push(format!("schema entry {} out of range", entry.display(program)));
        }
    }
    for &entry in input.fixed_indices() {
        if !plan.schema.contains(entry) {
            diags.push(format!("schema does not fix {}", entry.display(program)));
        }
    }
    diags
}

pub fn is_wellformed(plan: &EvaluationPlan, input: &PlannerInput) -> bool {
    wellformedness_diagnostics(plan, input).is_empty()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanFileError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for PlanFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "plan file line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for PlanFileError {}

/// Serializes a plan in the line-oriented interchange format:
///
/// ```text
/// schema <pred>/<arity> <arg>
/// order <rule> <bodyIdx> <position>
/// ```
///
/// Schema lines are sorted by predicate name, arity, argument; order lines
/// by rule id then position, so equal plans serialize byte-identically.
pub fn write_plan(plan: &EvaluationPlan, program: &Program) -> String {
    let mut out = String::new();
    for entry in plan.schema.sorted_entries(program) {
        out.push_str(&format!("schema {} {}\n", program.pred(entry.pred).tag(), entry.arg));
    }
    for (rule_id, ordering) in &plan.orderings {
        let mut lines: Vec<(usize, usize)> = ordering
            .sequence()
            .iter()
            .enumerate()
            .map(|(body_idx, &pos)| (pos, body_idx))
            .collect();
        lines.sort();
        for (pos, body_idx) in lines {
            out.push_str(&format!("order {} {} {}\n", rule_id, body_idx, pos));
        }
    }
    out
}

/// Parses the plan interchange format against a program.
pub fn read_plan(text: &str, program: &Program) -> Result<EvaluationPlan, PlanFileError> {
    let mut schema = IndexingSchema::new();
    let mut sequences: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |message: String| PlanFileError { line: lineno + 1, message };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["schema", tag, arg] => {
                let pred = program
                    .pred_by_tag(tag)
                    .ok_or_else(|| err(format!("unknown predicate {}", tag)))?;
                let arg: usize =
                    arg.parse().map_err(|_| err(format!("bad argument `{}`", arg)))?;
                if arg < 1 || arg > program.pred(pred).arity {
                    return Err(err(format!("argument {} out of range for {}", arg, tag)));
                }
                schema.insert(ArgRef::new(pred, arg));
            }
            ["order", rule, body_idx, pos] => {
                let parse = |s: &str, what: &str| -> Result<usize, PlanFileError> {
                    s.parse().map_err(|_| PlanFileError {
                        line: lineno + 1,
                        message: format!("bad {} `{}`", what, s),
                    })
                };
                let rule_id = parse(rule, "rule id")?;
                let body_idx = parse(body_idx, "body index")?;
                let pos = parse(pos, "position")?;
                let entry = sequences.entry(rule_id).or_default();
                if entry.insert(body_idx, pos).is_some() {
                    return Err(err(format!("atom {} of rule {} ordered twice", body_idx, rule_id)));
                }
            }
            _ => return Err(err(format!("unrecognized line `{}`", line))),
        }
    }
    let mut orderings = BTreeMap::new();
    for (rule_id, by_body) in sequences {
        let rule = program
            .rules
            .get(rule_id)
            .ok_or_else(|| PlanFileError { line: 0, message: format!("unknown rule id {}", rule_id) })?;
        let n = rule.body.len();
        let mut positions = vec![0usize; n];
        for (body_idx, pos) in by_body {
            if body_idx >= n {
                return Err(PlanFileError {
                    line: 0,
                    message: format!("rule {}: body index {} out of range", rule_id, body_idx),
                });
            }
            positions[body_idx] = pos;
        }
        if positions.iter().any(|&p| p == 0) {
            return Err(PlanFileError {
                line: 0,
                message: format!("rule {}: ordering does not cover every body atom", rule_id),
            });
        }
        let ordering = Ordering::new(rule_id, positions)
            .map_err(|e| PlanFileError { line: 0, message: format!("rule {}: {}", rule_id, e) })?;
        orderings.insert(rule_id, ordering);
    }
    Ok(EvaluationPlan { schema, orderings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    pub(crate) fn arg(program: &Program, name: &str, i: usize) -> ArgRef {
        ArgRef::new(program.pred_id(name).unwrap(), i)
    }

    fn indexable_tags(src: &str) -> BTreeSet<String> {
        let p = parse_program(src).unwrap();
        indexable_arguments(&p)
            .into_iter()
            .map(|e| format!("{}[{}]", p.pred(e.pred).name, e.arg))
            .collect()
    }

    #[test]
    fn indexable_arguments_running_example() {
        // Z joins a, c, e; V joins b, d; X, W, Y occur once each.
        let got = indexable_tags("h(X,Z,W) :- a(X,Z), b(V,W), c(Z), d(V), e(Y,Z).");
        let want: BTreeSet<String> =
            ["a[2]", "b[1]", "c[1]", "d[1]", "e[2]"].iter().map(|s| s.to_string()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn no_joins_no_indexable() {
        assert!(indexable_tags("p(X) :- e(X).").is_empty());
    }

    #[test]
    fn constant_argument_is_indexable() {
        let got = indexable_tags("p :- q(1).");
        assert_eq!(got, BTreeSet::from(["q[1]".to_string()]));
    }

    #[test]
    fn repeated_variable_in_same_atom() {
        // The second occurrence sees the first one earlier in the same atom.
        let got = indexable_tags("p(X) :- q(X,X).");
        assert_eq!(got, BTreeSet::from(["q[2]".to_string()]));
    }

    #[test]
    fn head_variables_do_not_make_arguments_indexable() {
        assert!(indexable_tags("h(X,Y) :- a(X,Y).").is_empty());
    }

    #[test]
    fn indexable_monotone_under_union() {
        let p1 = "h(X) :- a(X,Y), b(Y).";
        let p2 = "g(X) :- a(X,Y), c(Y,Z), d(Z).";
        let small = indexable_tags(p1);
        let union = indexable_tags(&format!("{}\n{}", p1, p2));
        assert!(small.is_subset(&union));
    }

    #[test]
    fn ordering_count_matches_factorial_of_free_atoms() {
        for n in 1..=5usize {
            for fixed_count in 0..=n.min(2) {
                let mut fixed = PositionAssignment::new();
                for k in 0..fixed_count {
                    // Pin atom k to position n - k.
                    fixed.fix(k, n - k, n).unwrap();
                }
                let all = all_orderings(0, n, &fixed);
                let expected: usize = (1..=(n - fixed_count)).product();
                assert_eq!(all.len(), expected, "n={} fixed={}", n, fixed_count);
                for o in &all {
                    assert!(o.extends(&fixed));
                }
            }
        }
    }

    #[test]
    fn wellformed_example_plan() {
        let program =
            parse_program("h(X,Z,W) :- a(X,Z), b(V,W), c(Z), d(V), e(Y,Z).").unwrap();
        let input = PlannerInput::with_defaults(program.clone());
        // Paper ordering: a->3, b->1, c->5, d->2, e->4.
        let ordering = Ordering::new(0, vec![3, 1, 5, 2, 4]).unwrap();
        let schema = IndexingSchema::from_entries([
            arg(&program, "a", 2),
            arg(&program, "c", 1),
            arg(&program, "d", 1),
            arg(&program, "e", 2),
        ]);
        let plan = EvaluationPlan { schema, orderings: BTreeMap::from([(0, ordering)]) };
        assert!(is_wellformed(&plan, &input));
    }

    #[test]
    fn duplicate_position_diagnosed() {
        let program = parse_program("h(X) :- a(X,Y), b(Y).").unwrap();
        let input = PlannerInput::with_defaults(program);
        let plan = EvaluationPlan {
            schema: IndexingSchema::new(),
            orderings: BTreeMap::from([(
                0,
                Ordering { rule: 0, positions: vec![1, 1] }, // bypasses the checked constructor
            )]),
        };
        let diags = wellformedness_diagnostics(&plan, &input);
        assert!(diags.iter().any(|d| d.contains("duplicate position")), "{:?}", diags);
    }

    #[test]
    fn schema_must_fix_fixed_indices() {
        let program = parse_program("h(X) :- a(X,Y), b(Y).").unwrap();
        let a2 = arg(&program, "a", 2);
        let b1 = arg(&program, "b", 1);
        let input = PlannerInput::builder(program).fix_index(a2).unwrap().build().unwrap();
        let plan = EvaluationPlan {
            schema: IndexingSchema::from_entries([b1]),
            orderings: BTreeMap::from([(0, Ordering::source_order(0, 2))]),
        };
        let diags = wellformedness_diagnostics(&plan, &input);
        assert!(diags.iter().any(|d| d.contains("does not fix")), "{:?}", diags);
    }

    #[test]
    fn plan_file_round_trip() {
        let program =
            parse_program("h(X,Z,W) :- a(X,Z), b(V,W), c(Z), d(V), e(Y,Z). g(X) :- a(X,Y), c(Y).")
                .unwrap();
        let plan = EvaluationPlan {
            schema: IndexingSchema::from_entries([arg(&program, "c", 1), arg(&program, "a", 2)]),
            orderings: BTreeMap::from([
                (0, Ordering::new(0, vec![3, 1, 5, 2, 4]).unwrap()),
                (1, Ordering::new(1, vec![2, 1]).unwrap()),
            ]),
        };
        let text = write_plan(&plan, &program);
        let back = read_plan(&text, &program).unwrap();
        assert_eq!(plan, back);
        // Deterministic: serialize again, byte-identical.
        assert_eq!(text, write_plan(&back, &program));
    }

    #[test]
    fn plan_file_rejects_duplicates() {
        let program = parse_program("h(X) :- a(X,Y), b(Y).").unwrap();
        let err = read_plan("order 0 0 1\norder 0 1 1\n", &program).unwrap_err();
        assert!(err.message.contains("duplicate position"), "{}", err);
    }

    #[test]
    fn default_costs_cover_indexable_arguments() {
        let program = parse_program("h(X) :- a(X,Y), b(Y). a(1,2). a(1,3). h2(Y) :- b(Y), h(Y).").unwrap();
        let input = PlannerInput::with_defaults(program);
        let program = input.program();
        // a is EDB with 2 facts; h is IDB joined in rule 1.
        assert_eq!(input.cost(ArgRef::new(program.pred_id("a").unwrap(), 2)), Some(2));
        assert_eq!(input.cost(ArgRef::new(program.pred_id("b").unwrap(), 1)), Some(0));
        assert_eq!(
            input.cost(ArgRef::new(program.pred_id("h").unwrap(), 1)),
            Some(PlannerInputBuilder::DEFAULT_IDB_COST)
        );
    }
}
