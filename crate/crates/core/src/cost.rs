//! Cost functions over evaluation plans and lexicographic strategies.
//!
//! Four integer costs are built in: index build cost (`w1`), positions of
//! recursive atoms (`w2`), indices off primary keys (`w3`), and
//! boundness-weighted positions (`w4`). A strategy is a non-empty sequence
//! of distinct cost functions; plans compare lexicographically on the
//! resulting vectors.

use std::collections::BTreeSet;
use std::fmt;

use crate::admissibility::bound_arguments;
use crate::ast::{PredId, Rule};
use crate::plan::{EvaluationPlan, Ordering, PlannerInput};
use crate::program::Program;

/// Identifier of one built-in cost function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CostFn {
    /// Total cost of building the schema's indices: sum of `c(p,i)`.
    W1,
    /// Sum of the positions of body atoms with a recursive predicate.
    W2,
    /// Number of schema entries that are not primary keys.
    W3,
    /// Sum over body atoms of `(maxArity - unbound) * position`.
    W4,
}

impl CostFn {
    pub fn parse(s: &str) -> Option<CostFn> {
        match s {
            "w1" => Some(CostFn::W1),
            "w2" => Some(CostFn::W2),
            "w3" => Some(CostFn::W3),
            "w4" => Some(CostFn::W4),
            _ => None,
        }
    }

    /// The numeric id used in solver-facing facts (`w1` -> 1, ...).
    pub fn number(self) -> usize {
        match self {
            CostFn::W1 => 1,
            CostFn::W2 => 2,
            CostFn::W3 => 3,
            CostFn::W4 => 4,
        }
    }
}

impl fmt::Display for CostFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.number())
    }
}

/// A non-empty sequence of distinct cost functions, most significant first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    sequence: Vec<CostFn>,
}

impl Strategy {
    pub fn new(sequence: Vec<CostFn>) -> Result<Self, StrategyError> {
        if sequence.is_empty() {
            return Err(StrategyError("strategy must name at least one cost function".into()));
        }
        let mut seen = BTreeSet::new();
        for f in &sequence {
            if !seen.insert(*f) {
                return Err(StrategyError(format!("duplicate cost function {}", f)));
            }
        }
        Ok(Strategy { sequence })
    }

    /// Parses a comma list such as `w1,w3,w2`.
    pub fn parse(text: &str) -> Result<Self, StrategyError> {
        let mut sequence = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            let f = CostFn::parse(part)
                .ok_or_else(|| StrategyError(format!("unknown cost function `{}`", part)))?;
            sequence.push(f);
        }
        Strategy::new(sequence)
    }

    /// The preset for constant-featuring workloads: `(w2, w4)`.
    pub fn sigma1() -> Self {
        Strategy { sequence: vec![CostFn::W2, CostFn::W4] }
    }

    /// The preset for constant-free workloads: `(w1, w2, w3, w4)`.
    pub fn sigma2() -> Self {
        Strategy { sequence: vec![CostFn::W1, CostFn::W2, CostFn::W3, CostFn::W4] }
    }

    pub fn sequence(&self) -> &[CostFn] {
        &self.sequence
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Weak-constraint priority levels: position `j` of `k` maps to level
    /// `k - j + 1`, so the leading function has the highest level.
    pub fn priority_levels(&self) -> impl Iterator<Item = (CostFn, usize)> + '_ {
        let k = self.sequence.len();
        self.sequence.iter().enumerate().map(move |(j, &f)| (f, k - j))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, fun) in self.sequence.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", fun)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyError(pub String);

impl fmt::Display for StrategyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for StrategyError {}

/// The values of a strategy's cost functions for one plan, in strategy order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostVector {
    pub strategy: Strategy,
    pub values: Vec<u64>,
}

impl fmt::Display for CostVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (fun, v)) in self.strategy.sequence().iter().zip(&self.values).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}={}", fun, v)?;
        }
        write!(f, ")")
    }
}

/// Outcome of comparing plan `a` against plan `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preference {
    Preferable,
    Equivalent,
    Dispreferred,
}

/// Lexicographic comparison of two cost vectors under the same strategy.
pub fn compare(a: &CostVector, b: &CostVector) -> Result<Preference, StrategyError> {
    if a.strategy != b.strategy {
        return Err(StrategyError(format!(
            "cannot compare vectors of different strategies ({} vs {})",
            a.strategy, b.strategy
        )));
    }
    for (x, y) in a.values.iter().zip(&b.values) {
        if x < y {
            return Ok(Preference::Preferable);
        }
        if x > y {
            return Ok(Preference::Dispreferred);
        }
    }
    Ok(Preference::Equivalent)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CostError {
    /// The cost table has no entry for a schema argument.
    MissingCost { tag: String, arg: usize },
}

impl fmt::Display for CostError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostError::MissingCost { tag, arg } => {
                write!(f, "no index cost configured for {}[{}]", tag, arg)
            }
        }
    }
}

impl std::error::Error for CostError {}

/// `w1`: total index build cost of the schema.
pub fn w1(plan: &EvaluationPlan, input: &PlannerInput) -> Result<u64, CostError> {
    let mut total = 0u64;
    for entry in plan.schema.iter() {
        let cost = input.cost(entry).ok_or_else(|| CostError::MissingCost {
            tag: input.program().pred(entry.pred).tag(),
            arg: entry.arg,
        })?;
        total += cost;
    }
    Ok(total)
}

/// `w2`: sum of the positions of body atoms whose predicate is recursive.
pub fn w2(plan: &EvaluationPlan, program: &Program) -> u64 {
    let recursive = program.recursive_predicates();
    plan.orderings
        .iter()
        .filter_map(|(&rule_id, ordering)| {
            program.rules.get(rule_id).map(|r| rule_w2_term(r, ordering, &recursive))
        })
        .sum()
}

/// One rule's contribution to `w2`.
pub fn rule_w2_term(rule: &Rule, ordering: &Ordering, recursive: &BTreeSet<PredId>) -> u64 {
    rule.body
        .iter()
        .enumerate()
        .filter(|(_, lit)| recursive.contains(&lit.atom.predicate))
        .map(|(bi, _)| ordering.position_of(bi) as u64)
        .sum()
}

/// `w3`: number of schema entries that are not primary keys.
pub fn w3(plan: &EvaluationPlan, input: &PlannerInput) -> u64 {
    plan.schema.iter().filter(|e| !input.keys().contains(e)).count() as u64
}

/// The maximum arity over all atoms appearing in the program's rules,
/// heads included.
pub fn max_arity(program: &Program) -> usize {
    program
        .rules
        .iter()
        .flat_map(|r| {
            std::iter::once(r.head.terms.len()).chain(r.body.iter().map(|l| l.atom.terms.len()))
        })
        .max()
        .unwrap_or(0)
}

/// `w4`: sum over body atoms of `(maxArity - unbound) * position`, rewarding
/// orderings that place poorly-bound atoms early.
pub fn w4(plan: &EvaluationPlan, program: &Program) -> u64 {
    let m = max_arity(program);
    plan.orderings
        .iter()
        .filter_map(|(&rule_id, ordering)| {
            program.rules.get(rule_id).map(|r| rule_w4_term(r, ordering, m))
        })
        .sum()
}

/// One rule's contribution to `w4`.
pub fn rule_w4_term(rule: &Rule, ordering: &Ordering, max_arity: usize) -> u64 {
    (0..rule.body.len())
        .map(|bi| {
            let arity = rule.body[bi].atom.terms.len();
            let unbound = arity - bound_arguments(rule, ordering, bi).len();
            ((max_arity - unbound) * ordering.position_of(bi)) as u64
        })
        .sum()
}

/// Evaluates the input's strategy on a plan.
pub fn cost_vector(plan: &EvaluationPlan, input: &PlannerInput) -> Result<CostVector, CostError> {
    let strategy = input.strategy().clone();
    let mut values = Vec::with_capacity(strategy.len());
    for f in strategy.sequence() {
        let v = match f {
            CostFn::W1 => w1(plan, input)?,
            CostFn::W2 => w2(plan, input.program()),
            CostFn::W3 => w3(plan, input),
            CostFn::W4 => w4(plan, input.program()),
        };
        values.push(v);
    }
    Ok(CostVector { strategy, values })
}
