//! Relation statistics from a sample database, and the planner inputs
//! (index costs, key candidates) derived from them.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::{Atom, PredId, Term};
use crate::plan::ArgRef;
use crate::program::Program;

/// Exact per-relation counts from a fact sample. A relation is a set:
/// duplicate facts count once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationStats {
    pub pred: PredId,
    pub tuples: usize,
    /// Distinct values per argument (1-based externally, 0-based here).
    pub distinct: Vec<usize>,
}

impl RelationStats {
    /// `distinct / tuples` for an argument, or `None` for an empty relation
    /// (stats unknown).
    pub fn selectivity(&self, arg: usize) -> Option<f64> {
        if self.tuples == 0 {
            return None;
        }
        Some(self.distinct[arg - 1] as f64 / self.tuples as f64)
    }

    /// Selectivity exactly 1 marks the argument as a key candidate.
    pub fn is_key(&self, arg: usize) -> bool {
        self.tuples > 0 && self.distinct[arg - 1] == self.tuples
    }
}

/// Exact counts per predicate over a list of ground atoms. Permutation
/// invariant: only the set of facts matters.
pub fn collect_stats(facts: &[Atom]) -> BTreeMap<PredId, RelationStats> {
    let mut relations: BTreeMap<PredId, BTreeSet<&[Term]>> = BTreeMap::new();
    for fact in facts {
        relations.entry(fact.predicate).or_default().insert(&fact.terms);
    }
    relations
        .into_iter()
        .map(|(pred, tuples)| {
            let arity = tuples.iter().next().map(|t| t.len()).unwrap_or(0);
            let mut distinct = Vec::with_capacity(arity);
            for i in 0..arity {
                let values: BTreeSet<&Term> = tuples.iter().map(|t| &t[i]).collect();
                distinct.push(values.len());
            }
            (pred, RelationStats { pred, tuples: tuples.len(), distinct })
        })
        .collect()
}

/// Derives the planner's cost table and key set: every argument of a
/// predicate costs `round(tuples * scale)` (a hash index holds one entry per
/// tuple), and arguments with selectivity exactly 1 are keys.
pub fn derive_planner_inputs(
    stats: &BTreeMap<PredId, RelationStats>,
    scale: f64,
) -> (BTreeMap<ArgRef, u64>, BTreeSet<ArgRef>) {
    let mut costs = BTreeMap::new();
    let mut keys = BTreeSet::new();
    for (&pred, rel) in stats {
        let cost = (rel.tuples as f64 * scale).round() as u64;
        for arg in 1..=rel.distinct.len() {
            costs.insert(ArgRef::new(pred, arg), cost);
            if rel.is_key(arg) {
                keys.insert(ArgRef::new(pred, arg));
            }
        }
    }
    (costs, keys)
}

/// Renders the derived inputs as solver-facing fact lines
/// (`index("p/2",1,100).` then `key("p/2",2).`), sorted by predicate.
pub fn fact_lines(
    program: &Program,
    costs: &BTreeMap<ArgRef, u64>,
    keys: &BTreeSet<ArgRef>,
) -> String {
    let mut sorted_costs: Vec<(ArgRef, u64)> = costs.iter().map(|(&e, &c)| (e, c)).collect();
    sorted_costs.sort_by(|a, b| a.0.sort_key(program).cmp(&b.0.sort_key(program)));
    let mut out = String::new();
    for (entry, cost) in sorted_costs {
        out.push_str(&format!(
            "index(\"{}\",{},{}).\n",
            program.pred(entry.pred).tag(),
            entry.arg,
            cost
        ));
    }
    let mut sorted_keys: Vec<ArgRef> = keys.iter().copied().collect();
    sorted_keys.sort_by(|a, b| a.sort_key(program).cmp(&b.sort_key(program)));
    for entry in sorted_keys {
        out.push_str(&format!("key(\"{}\",{}).\n", program.pred(entry.pred).tag(), entry.arg));
    }
    out
}

/// Human-readable summary, one block per predicate.
pub fn report(program: &Program, stats: &BTreeMap<PredId, RelationStats>) -> String {
    let mut names: Vec<(&str, PredId)> =
        stats.keys().map(|&p| (program.pred(p).name.as_str(), p)).collect();
    names.sort();
    let mut out = String::new();
    for (_, pred) in names {
        let rel = &stats[&pred];
        out.push_str(&format!("{}: {} tuples\n", program.pred(pred).tag(), rel.tuples));
        for arg in 1..=rel.distinct.len() {
            let sel = rel
                .selectivity(arg)
                .map(|s| format!("{:.3}", s))
                .unwrap_or_else(|| "unknown".into());
            let key = if rel.is_key(arg) { "  (key)" } else { "" };
            out.push_str(&format!(
                "  arg {}: {} distinct, selectivity {}{}\n",
                arg,
                rel.distinct[arg - 1],
                sel,
                key
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    #[test]
    fn counts_tuples_and_distinct_values() {
        let p = parse_program("p(1,2). p(1,3).").unwrap();
        let stats = collect_stats(&p.facts);
        let rel = &stats[&p.pred_id("p").unwrap()];
        assert_eq!(rel.tuples, 2);
        assert_eq!(rel.distinct, vec![1, 2]);
        assert_eq!(rel.selectivity(1), Some(0.5));
        assert_eq!(rel.selectivity(2), Some(1.0));
        assert!(!rel.is_key(1));
        assert!(rel.is_key(2));
    }

    #[test]
    fn empty_sample_has_unknown_stats() {
        let stats = collect_stats(&[]);
        assert!(stats.is_empty());
        let synthetic = RelationStats { pred: crate::ast::PredId(0), tuples: 0, distinct: vec![0] };
        assert_eq!(synthetic.selectivity(1), None);
        assert!(!synthetic.is_key(1));
    }

    #[test]
    fn self_pair_relation() {
        let p = parse_program("e(1,1).").unwrap();
        let stats = collect_stats(&p.facts);
        let rel = &stats[&p.pred_id("e").unwrap()];
        assert_eq!(rel.distinct, vec![1, 1]);
        assert_eq!(rel.selectivity(1), Some(1.0));
        assert_eq!(rel.selectivity(2), Some(1.0));
    }

    #[test]
    fn duplicate_facts_count_once() {
        let p = parse_program("p(1,2). p(1,2). p(1,3).").unwrap();
        let stats = collect_stats(&p.facts);
        assert_eq!(stats[&p.pred_id("p").unwrap()].tuples, 2);
    }

    #[test]
    fn derive_costs_and_keys() {
        let p = parse_program("p(1,2). p(1,3).").unwrap();
        let pid = p.pred_id("p").unwrap();
        let stats = collect_stats(&p.facts);
        let (costs, keys) = derive_planner_inputs(&stats, 1.0);
        assert_eq!(costs[&ArgRef::new(pid, 1)], 2);
        assert_eq!(costs[&ArgRef::new(pid, 2)], 2);
        assert_eq!(keys, BTreeSet::from([ArgRef::new(pid, 2)]));
    }

    #[test]
    fn scale_multiplies_costs() {
        let p = parse_program("p(1). p(2). p(3).").unwrap();
        let pid = p.pred_id("p").unwrap();
        let stats = collect_stats(&p.facts);
        let (costs, keys) = derive_planner_inputs(&stats, 1000.0);
        assert_eq!(costs[&ArgRef::new(pid, 1)], 3000);
        // Scaling changes costs, never the key set.
        let (_, keys_unscaled) = derive_planner_inputs(&stats, 1.0);
        assert_eq!(keys, keys_unscaled);
        assert_eq!(keys, BTreeSet::from([ArgRef::new(pid, 1)]));
    }

    #[test]
    fn rounding_is_half_up() {
        let p = parse_program("p(1). p(2). p(3).").unwrap();
        let pid = p.pred_id("p").unwrap();
        let stats = collect_stats(&p.facts);
        let (costs, _) = derive_planner_inputs(&stats, 0.5);
        assert_eq!(costs[&ArgRef::new(pid, 1)], 2); // 1.5 rounds up
    }

    #[test]
    fn permutation_invariant() {
        let a = parse_program("p(1,2). p(2,2). q(7).").unwrap();
        let b = parse_program("q(7). p(2,2). p(1,2).").unwrap();
        // Same predicate interning order is not guaranteed, so compare by tag.
        let norm = |prog: &crate::program::Program| -> Vec<(String, usize, Vec<usize>)> {
            collect_stats(&prog.facts)
                .values()
                .map(|r| (prog.pred(r.pred).tag(), r.tuples, r.distinct.clone()))
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect()
        };
        assert_eq!(norm(&a), norm(&b));
    }

    #[test]
    fn fact_lines_are_sorted_and_soluble() {
        let p = parse_program("b(1). a(1,2). a(2,2).").unwrap();
        let stats = collect_stats(&p.facts);
        let (costs, keys) = derive_planner_inputs(&stats, 1.0);
        let text = fact_lines(&p, &costs, &keys);
        let expect = "index(\"a/2\",1,2).\nindex(\"a/2\",2,2).\nindex(\"b/1\",1,1).\nkey(\"a/2\",1).\nkey(\"b/1\",1).\n";
        assert_eq!(text, expect);
    }
}
