//! Admissibility of a body ordering with respect to an indexing schema:
//! rule hypergraphs, connected components, bound/indexBound arguments,
//! component separation, and well-ordering.
//!
//! All functions here operate on positive rules (the planner profile); the
//! body index space is the rule's literal list in source order.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::{Atom, Rule, Term};
use crate::plan::{ArgRef, IndexingSchema, Ordering};
use crate::program::Program;

/// The hypergraph of a rule body: vertices are the terms occurring in the
/// body (constants included), edges are the term sets of each atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleHypergraph {
    pub rule: usize,
    pub vertices: BTreeSet<Term>,
    /// One term set per body atom, in source order.
    pub edges: Vec<BTreeSet<Term>>,
}

/// The connected components of a rule body, as sets of body indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentPartition {
    pub rule: usize,
    /// Components ordered by smallest body index; atoms within a component
    /// are in source order.
    pub components: Vec<Vec<usize>>,
    /// `component_of[body_idx]` is the index into `components`.
    pub component_of: Vec<usize>,
}

fn body(rule: &Rule) -> Vec<&Atom> {
    debug_assert!(rule.is_positive(), "admissibility is defined on positive rules");
    rule.body.iter().map(|l| &l.atom).collect()
}

pub fn hypergraph(rule: &Rule) -> RuleHypergraph {
    let body = body(rule);
    let edges: Vec<BTreeSet<Term>> =
        body.iter().map(|a| a.terms.iter().cloned().collect()).collect();
    let vertices = edges.iter().flatten().cloned().collect();
    RuleHypergraph { rule: rule.id, vertices, edges }
}

/// Groups atom indices by connectivity through shared terms (union-find).
/// Ordered by smallest member index; members in ascending order.
pub(crate) fn connected_groups(atoms: &[&Atom]) -> Vec<Vec<usize>> {
    let n = atoms.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    let mut owner: BTreeMap<&Term, usize> = BTreeMap::new();
    for (bi, atom) in atoms.iter().enumerate() {
        for term in &atom.terms {
            match owner.get(term) {
                Some(&first) => {
                    let (a, b) = (find(&mut parent, first), find(&mut parent, bi));
                    if a != b {
                        parent[b] = a;
                    }
                }
                None => {
                    owner.insert(term, bi);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for bi in 0..n {
        let root = find(&mut parent, bi);
        groups.entry(root).or_default().push(bi);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Maximal sets of body atoms connected through shared terms. Atoms sharing
/// only a constant are connected (the hypergraph's vertex set is the set of
/// all terms). Zero-arity atoms form singleton components.
pub fn components(rule: &Rule) -> ComponentPartition {
    let body = body(rule);
    let components = connected_groups(&body);
    let mut component_of = vec![0usize; body.len()];
    for (ci, comp) in components.iter().enumerate() {
        for &bi in comp {
            component_of[bi] = ci;
        }
    }
    ComponentPartition { rule: rule.id, components, component_of }
}

/// Argument positions (1-based) of the atom at `body_idx` holding a constant
/// or a variable that occurs in some body atom at a strictly smaller
/// position.
pub fn bound_arguments(rule: &Rule, ordering: &Ordering, body_idx: usize) -> BTreeSet<usize> {
    bound_arguments_at(rule, ordering, body_idx, ordering.position_of(body_idx))
}

/// Like [`bound_arguments`], but evaluates the atom as if it sat at
/// `position`: only atoms at strictly smaller positions contribute bindings.
pub fn bound_arguments_at(
    rule: &Rule,
    ordering: &Ordering,
    body_idx: usize,
    position: usize,
) -> BTreeSet<usize> {
    let body = body(rule);
    let atom = body[body_idx];
    let mut bound = BTreeSet::new();
    for (i, term) in atom.terms.iter().enumerate() {
        let is_bound = match term {
            Term::Constant(_) => true,
            Term::Variable(v) => body.iter().enumerate().any(|(bj, other)| {
                bj != body_idx
                    && ordering.position_of(bj) < position
                    && other.variables().any(|w| w == v)
            }),
        };
        if is_bound {
            bound.insert(i + 1);
        }
    }
    bound
}

/// Bound argument positions that are also in the schema.
pub fn index_bound_arguments(
    rule: &Rule,
    ordering: &Ordering,
    schema: &IndexingSchema,
    body_idx: usize,
) -> BTreeSet<usize> {
    let pred = rule.body[body_idx].atom.predicate;
    bound_arguments(rule, ordering, body_idx)
        .into_iter()
        .filter(|&i| schema.contains(ArgRef::new(pred, i)))
        .collect()
}

/// A reason an ordering is not admissible. Positions are 1-based; checks
/// report the smallest violating position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// The atom at `position` belongs to a different component than the one
    /// currently open, so two components interleave.
    Interleaved { position: usize, body_idx: usize, open_body_idx: usize },
    /// A non-first atom of its component has no indexBound argument.
    MissingIndexBound { position: usize, body_idx: usize },
    /// The atom is not fully bound, yet `witness` (later in the same
    /// component) would have all arguments bound at this position.
    PostponedBoundAtom { position: usize, body_idx: usize, witness: usize },
}

impl Violation {
    pub fn position(&self) -> usize {
        match self {
            Violation::Interleaved { position, .. }
            | Violation::MissingIndexBound { position, .. }
            | Violation::PostponedBoundAtom { position, .. } => *position,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Violation::Interleaved { .. } => 0,
            Violation::MissingIndexBound { .. } => 1,
            Violation::PostponedBoundAtom { .. } => 2,
        }
    }

    pub fn display(&self, program: &Program, rule: &Rule) -> String {
        let atom = |bi: usize| program.atom_text(&rule.body[bi].atom);
        match self {
            Violation::Interleaved { position, body_idx, open_body_idx } => format!(
                "position {}: {} interleaves the component of {}",
                position,
                atom(*body_idx),
                atom(*open_body_idx)
            ),
            Violation::MissingIndexBound { position, body_idx } => format!(
                "position {}: {} has no indexBound argument",
                position,
                atom(*body_idx)
            ),
            Violation::PostponedBoundAtom { position, body_idx, witness } => format!(
                "position {}: {} is not fully bound, but {} placed here would be",
                position,
                atom(*body_idx),
                atom(*witness)
            ),
        }
    }
}

/// Checks that the connected components occupy contiguous position ranges.
pub fn components_separated(rule: &Rule, ordering: &Ordering) -> Result<(), Violation> {
    let partition = components(rule);
    separated_with(&partition, ordering)
}

pub(crate) fn separated_with(
    partition: &ComponentPartition,
    ordering: &Ordering,
) -> Result<(), Violation> {
    let mut remaining: Vec<usize> = partition.components.iter().map(Vec::len).collect();
    let mut open: Option<(usize, usize)> = None; // (component, first body idx seen)
    for (position, body_idx) in ordering.by_position().into_iter().enumerate() {
        let position = position + 1;
        let comp = partition.component_of[body_idx];
        match open {
            Some((c, first)) if c != comp => {
                return Err(Violation::Interleaved { position, body_idx, open_body_idx: first });
            }
            _ => {}
        }
        if open.is_none() {
            open = Some((comp, body_idx));
        }
        remaining[comp] -= 1;
        if remaining[comp] == 0 {
            open = None;
        }
    }
    Ok(())
}

/// Checks the well-ordering of one component: each atom after the
/// component's first must have an indexBound argument, and an atom that is
/// not fully bound must not stand in front of one that would be.
pub fn component_well_ordered(
    rule: &Rule,
    ordering: &Ordering,
    schema: &IndexingSchema,
    component: &[usize],
) -> Result<(), Violation> {
    let arity = |bi: usize| rule.body[bi].atom.terms.len();
    let mut by_pos: Vec<usize> = component.to_vec();
    by_pos.sort_by_key(|&bi| ordering.position_of(bi));
    for (k, &body_idx) in by_pos.iter().enumerate() {
        if k == 0 {
            continue; // the component's first atom carries no obligations
        }
        let position = ordering.position_of(body_idx);
        if index_bound_arguments(rule, ordering, schema, body_idx).is_empty() {
            return Err(Violation::MissingIndexBound { position, body_idx });
        }
        let fully_bound =
            bound_arguments(rule, ordering, body_idx).len() == arity(body_idx);
        if !fully_bound {
            for &later in &by_pos[k + 1..] {
                let would_be_bound =
                    bound_arguments_at(rule, ordering, later, position).len() == arity(later);
                if would_be_bound {
                    return Err(Violation::PostponedBoundAtom {
                        position,
                        body_idx,
                        witness: later,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Full admissibility: components mutually separated and every component
/// well-ordered. On failure reports the violation with the smallest
/// position (separation wins ties).
pub fn is_admissible(
    rule: &Rule,
    ordering: &Ordering,
    schema: &IndexingSchema,
) -> Result<(), Violation> {
    let partition = components(rule);
    let mut worst: Option<Violation> = None;
    let mut consider = |v: Violation| {
        let better = match &worst {
            None => true,
            Some(w) => (v.position(), v.rank()) < (w.position(), w.rank()),
        };
        if better {
            worst = Some(v);
        }
    };
    if let Err(v) = separated_with(&partition, ordering) {
        consider(v);
    }
    for component in &partition.components {
        if let Err(v) = component_well_ordered(rule, ordering, schema, component) {
            consider(v);
        }
    }
    match worst {
        None => Ok(()),
        Some(v) => Err(v),
    }
}
