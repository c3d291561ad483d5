//! Validated programs: predicate table, EDB/IDB split, dependency graph,
//! recursion information, and canonical text rendering.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;

use crate::ast::{Atom, PredId, Predicate, Rule};

/// A parsed Datalog program plus its database of facts.
#[derive(Debug, Clone)]
pub struct Program {
    pub rules: Vec<Rule>,
    /// Ground atoms, in source order (duplicates preserved; relations
    /// deduplicate on load).
    pub facts: Vec<Atom>,
    pub predicates: Vec<Predicate>,
    by_name: HashMap<String, PredId>,
}

impl Program {
    pub(crate) fn assemble(rules: Vec<Rule>, facts: Vec<Atom>, mut predicates: Vec<Predicate>) -> Self {
        for rule in &rules {
            predicates[rule.head.predicate.index()].is_edb = false;
        }
        let by_name = predicates
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), PredId(i as u32)))
            .collect();
        Program { rules, facts, predicates, by_name }
    }

    pub fn pred(&self, id: PredId) -> &Predicate {
        &self.predicates[id.index()]
    }

    pub fn pred_id(&self, name: &str) -> Option<PredId> {
        self.by_name.get(name).copied()
    }

    /// Looks a predicate up by its `name/arity` tag.
    pub fn pred_by_tag(&self, tag: &str) -> Option<PredId> {
        let (name, arity) = tag.rsplit_once('/')?;
        let arity: usize = arity.parse().ok()?;
        let id = self.pred_id(name)?;
        (self.pred(id).arity == arity).then_some(id)
    }

    /// Registers a predicate that occurs only in the external database.
    /// Errors if the name is already in use with a different arity.
    pub fn declare_predicate(&mut self, name: &str, arity: usize) -> Result<PredId, String> {
        if let Some(id) = self.pred_id(name) {
            let known = self.pred(id).arity;
            if known != arity {
                return Err(format!(
                    "predicate `{}` declared with arity {} but already known with arity {}",
                    name, arity, known
                ));
            }
            return Ok(id);
        }
        let id = PredId(self.predicates.len() as u32);
        self.predicates.push(Predicate { name: name.to_string(), arity, is_edb: true });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// Whitespace-free rendering of an atom, e.g. `a(X,Y)`. This is the
    /// atom's identity in fact streams and plan answers.
    pub fn atom_text(&self, atom: &Atom) -> String {
        let mut s = self.pred(atom.predicate).name.clone();
        if !atom.terms.is_empty() {
            s.push('(');
            for (i, t) in atom.terms.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push_str(&t.to_string());
            }
            s.push(')');
        }
        s
    }

    /// Whitespace-free rendering of a rule, e.g. `h1(X):-a(X,Y),b(Y).`
    pub fn rule_text(&self, rule: &Rule) -> String {
        let mut s = self.atom_text(&rule.head);
        s.push_str(":-");
        for (i, lit) in rule.body.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            if lit.negative {
                s.push_str("not ");
            }
            s.push_str(&self.atom_text(&lit.atom));
        }
        s.push('.');
        s
    }

    /// Full-program rendering that re-parses to an equal program.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&self.rule_text(rule));
            out.push('\n');
        }
        for fact in &self.facts {
            out.push_str(&self.atom_text(fact));
            out.push_str(".\n");
        }
        out
    }

    /// Rules eligible for planning: non-empty positive body. Rules with
    /// negative literals (full profile only) are not planned.
    pub fn planner_rules(&self) -> Vec<&Rule> {
        self.rules.iter().filter(|r| !r.body.is_empty() && r.is_positive()).collect()
    }

    /// The predicate dependency graph: an edge `q -> p` whenever `q` occurs
    /// in the body of a rule with head predicate `p`.
    fn dependency_graph(&self) -> DiGraphMap<PredId, ()> {
        let mut graph = DiGraphMap::new();
        for pred in 0..self.predicates.len() {
            graph.add_node(PredId(pred as u32));
        }
        for rule in &self.rules {
            for lit in &rule.body {
                graph.add_edge(lit.atom.predicate, rule.head.predicate, ());
            }
        }
        graph
    }

    /// Predicates on a directed cycle of the dependency graph (self-loops
    /// included).
    pub fn recursive_predicates(&self) -> BTreeSet<PredId> {
        let graph = self.dependency_graph();
        let mut recursive = BTreeSet::new();
        for component in tarjan_scc(&graph) {
            if component.len() > 1 {
                recursive.extend(component);
            } else if let [single] = component[..] {
                if graph.contains_edge(single, single) {
                    recursive.insert(single);
                }
            }
        }
        recursive
    }

    /// Splits predicates into strata evaluable bottom-up. Errors when a
    /// dependency cycle passes through negation.
    pub fn stratify(&self) -> Result<Vec<Vec<PredId>>, StratifyError> {
        let graph = self.dependency_graph();
        let mut negative_edges: HashSet<(PredId, PredId)> = HashSet::new();
        for rule in &self.rules {
            for lit in &rule.body {
                if lit.negative {
                    negative_edges.insert((lit.atom.predicate, rule.head.predicate));
                }
            }
        }
        // tarjan_scc returns components in postorder of the condensation;
        // with body->head edges, bottom-up evaluation order is the reverse.
        let mut strata = Vec::new();
        for component in tarjan_scc(&graph).into_iter().rev() {
            let members: HashSet<PredId> = component.iter().copied().collect();
            for &(from, to) in &negative_edges {
                if members.contains(&from) && members.contains(&to) {
                    return Err(StratifyError {
                        negated: self.pred(from).tag(),
                        head: self.pred(to).tag(),
                    });
                }
            }
            let mut sorted = component;
            sorted.sort();
            strata.push(sorted);
        }
        Ok(strata)
    }
}

/// Returned when a program cannot be stratified: some predicate depends
/// negatively on itself through a cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratifyError {
    pub negated: String,
    pub head: String,
}

impl fmt::Display for StratifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "program is not stratifiable: `{}` is negated in a rule for `{}` within the same cycle",
            self.negated, self.head
        )
    }
}

impl std::error::Error for StratifyError {}
