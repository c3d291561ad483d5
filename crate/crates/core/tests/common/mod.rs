//! Shared test oracles: a naive-fixpoint evaluator, a literal from-scratch
//! admissibility re-implementation, and a random planner-input generator.
//! Everything here is independent of the library's implementation paths it
//! is used to check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use evalplan::ast::{Atom, Constant, PredId, Rule, Term};
use evalplan::cost::Strategy;
use evalplan::plan::{indexable_arguments, ArgRef, PlannerInput};
use evalplan::program::Program;

pub type Tuple = Vec<Constant>;
pub type Db = BTreeMap<PredId, BTreeSet<Tuple>>;

fn ground(atom: &Atom) -> Tuple {
    atom.terms
        .iter()
        .map(|t| match t {
            Term::Constant(c) => c.clone(),
            Term::Variable(v) => panic!("fact with variable {}", v),
        })
        .collect()
}

/// Naive stratified fixpoint: strata by level relaxation, then full
/// re-derivation rounds until nothing changes. Joins rebuild a fresh
/// one-argument hash table per literal per round; no plan, no deltas, no
/// persistent indices. Returns the model and the number of successful body
/// matches (duplicates re-derived every round included).
pub fn naive_model(program: &Program) -> (Db, u64) {
    let n = program.predicates.len();
    let mut level = vec![0usize; n];
    loop {
        let mut changed = false;
        for rule in &program.rules {
            let head = rule.head.predicate.index();
            for lit in &rule.body {
                let body = lit.atom.predicate.index();
                let need = if lit.negative { level[body] + 1 } else { level[body] };
                if level[head] < need {
                    level[head] = need;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        assert!(level.iter().all(|&l| l <= n), "program is not stratifiable");
    }

    let mut db: Db = BTreeMap::new();
    for fact in &program.facts {
        db.entry(fact.predicate).or_default().insert(ground(fact));
    }
    let mut derivations = 0u64;
    let max_level = level.iter().copied().max().unwrap_or(0);
    for stratum in 0..=max_level {
        let rules: Vec<&Rule> = program
            .rules
            .iter()
            .filter(|r| level[r.head.predicate.index()] == stratum)
            .collect();
        if rules.is_empty() {
            continue;
        }
        loop {
            let mut fresh: Vec<(PredId, Tuple)> = Vec::new();
            for rule in &rules {
                derive_rule(rule, &db, &mut fresh, &mut derivations);
            }
            let mut changed = false;
            for (pred, tuple) in fresh {
                if db.entry(pred).or_default().insert(tuple) {
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
    (db, derivations)
}

fn derive_rule(rule: &Rule, db: &Db, out: &mut Vec<(PredId, Tuple)>, derivations: &mut u64) {
    let positives: Vec<&Atom> = rule.positive_body().collect();
    let negatives: Vec<&Atom> =
        rule.body.iter().filter(|l| l.negative).map(|l| &l.atom).collect();
    let empty = BTreeSet::new();

    // Which argument of each literal is first guaranteed bound at its
    // depth (a constant, or a variable from an earlier positive literal);
    // one lookup table per such literal, built once per call.
    let mut seen_vars: Vec<&str> = Vec::new();
    let mut tables: Vec<Option<(usize, HashMap<&Constant, Vec<&Tuple>>)>> = Vec::new();
    for atom in &positives {
        let bound_arg = atom.terms.iter().position(|t| match t {
            Term::Constant(_) => true,
            Term::Variable(v) => seen_vars.contains(&v.as_str()),
        });
        match bound_arg {
            Some(arg) => {
                let mut table: HashMap<&Constant, Vec<&Tuple>> = HashMap::new();
                for tuple in db.get(&atom.predicate).unwrap_or(&empty) {
                    table.entry(&tuple[arg]).or_default().push(tuple);
                }
                tables.push(Some((arg, table)));
            }
            None => tables.push(None),
        }
        seen_vars.extend(atom.variables());
    }

    fn matches(
        atom: &Atom,
        tuple: &[Constant],
        bindings: &HashMap<String, Constant>,
    ) -> Option<Vec<(String, Constant)>> {
        let mut extensions: Vec<(String, Constant)> = Vec::new();
        for (i, term) in atom.terms.iter().enumerate() {
            match term {
                Term::Constant(c) => {
                    if &tuple[i] != c {
                        return None;
                    }
                }
                Term::Variable(v) => {
                    let existing = bindings
                        .get(v)
                        .or_else(|| extensions.iter().find(|(w, _)| w == v).map(|(_, c)| c));
                    match existing {
                        Some(c) => {
                            if &tuple[i] != c {
                                return None;
                            }
                        }
                        None => extensions.push((v.clone(), tuple[i].clone())),
                    }
                }
            }
        }
        Some(extensions)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        positives: &[&Atom],
        negatives: &[&Atom],
        head: &Atom,
        idx: usize,
        db: &Db,
        empty: &BTreeSet<Tuple>,
        tables: &[Option<(usize, HashMap<&Constant, Vec<&Tuple>>)>],
        bindings: &mut HashMap<String, Constant>,
        out: &mut Vec<(PredId, Tuple)>,
        derivations: &mut u64,
    ) {
        if idx == positives.len() {
            for neg in negatives {
                let tuple: Tuple = neg
                    .terms
                    .iter()
                    .map(|t| match t {
                        Term::Constant(c) => c.clone(),
                        Term::Variable(v) => bindings[v].clone(),
                    })
                    .collect();
                if db.get(&neg.predicate).unwrap_or(empty).contains(&tuple) {
                    return;
                }
            }
            *derivations += 1;
            let tuple: Tuple = head
                .terms
                .iter()
                .map(|t| match t {
                    Term::Constant(c) => c.clone(),
                    Term::Variable(v) => bindings[v].clone(),
                })
                .collect();
            out.push((head.predicate, tuple));
            return;
        }
        let atom = positives[idx];
        let candidates: Vec<&Tuple> = match &tables[idx] {
            Some((arg, table)) => {
                let want: Constant = match &atom.terms[*arg] {
                    Term::Constant(c) => c.clone(),
                    Term::Variable(v) => bindings[v].clone(),
                };
                table.get(&want).cloned().unwrap_or_default()
            }
            None => db.get(&atom.predicate).unwrap_or(empty).iter().collect(),
        };
        for tuple in candidates {
            if let Some(extensions) = matches(atom, tuple, bindings) {
                for (v, c) in &extensions {
                    bindings.insert(v.clone(), c.clone());
                }
                recurse(
                    positives,
                    negatives,
                    head,
                    idx + 1,
                    db,
                    empty,
                    tables,
                    bindings,
                    out,
                    derivations,
                );
                for (v, _) in &extensions {
                    bindings.remove(v);
                }
            }
        }
    }

    let mut bindings = HashMap::new();
    recurse(
        &positives,
        &negatives,
        &rule.head,
        0,
        db,
        &empty,
        &tables,
        &mut bindings,
        out,
        derivations,
    );
}

/// Converts an engine model to the oracle's representation.
pub fn model_to_db(model: &evalplan::engine::Model) -> Db {
    model.relations().map(|(p, r)| (p, r.clone())).collect()
}

// ---------------------------------------------------------------------------
// Literal re-implementation of separation and well-ordering, from scratch.
// ---------------------------------------------------------------------------

/// `positions[body_idx]` is the 1-based position. Schema entries are
/// (predicate, 1-based argument).
pub fn brute_admissible(
    rule: &Rule,
    positions: &[usize],
    schema: &BTreeSet<(PredId, usize)>,
) -> bool {
    let atoms: Vec<&Atom> = rule.body.iter().map(|l| &l.atom).collect();
    let n = atoms.len();

    // Connected components: repeated relabeling until stable.
    let shares_term = |a: &Atom, b: &Atom| a.terms.iter().any(|t| b.terms.contains(t));
    let mut comp: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i != j && shares_term(atoms[i], atoms[j]) && comp[i] != comp[j] {
                    let low = comp[i].min(comp[j]);
                    comp[i] = low;
                    comp[j] = low;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Separation, literally: for every pair of distinct components,
    // max(one) < min(other) or vice versa.
    let labels: BTreeSet<usize> = comp.iter().copied().collect();
    for &c1 in &labels {
        for &c2 in &labels {
            if c1 >= c2 {
                continue;
            }
            let positions_of = |c: usize| -> Vec<usize> {
                (0..n).filter(|&i| comp[i] == c).map(|i| positions[i]).collect()
            };
            let p1 = positions_of(c1);
            let p2 = positions_of(c2);
            let max1 = *p1.iter().max().unwrap();
            let min1 = *p1.iter().min().unwrap();
            let max2 = *p2.iter().max().unwrap();
            let min2 = *p2.iter().min().unwrap();
            if !(max1 < min2 || max2 < min1) {
                return false;
            }
        }
    }

    // Bound: constant, or a variable occurring in an atom at a smaller
    // position. Evaluated "as if at position `at`".
    let bound_at = |body_idx: usize, arg0: usize, at: usize| -> bool {
        match &atoms[body_idx].terms[arg0] {
            Term::Constant(_) => true,
            Term::Variable(v) => (0..n).any(|j| {
                j != body_idx
                    && positions[j] < at
                    && atoms[j].terms.iter().any(|t| t.as_variable() == Some(v.as_str()))
            }),
        }
    };
    let all_bound_at = |body_idx: usize, at: usize| -> bool {
        (0..atoms[body_idx].terms.len()).all(|i| bound_at(body_idx, i, at))
    };

    // Well-ordering per component, literally Def. 4.
    for &c in &labels {
        let members: Vec<usize> = (0..n).filter(|&i| comp[i] == c).collect();
        let m = members.iter().map(|&i| positions[i]).min().unwrap();
        for &beta in &members {
            let j = positions[beta];
            if j == m {
                continue;
            }
            // (i) at least one indexBound argument.
            let index_bound = (0..atoms[beta].terms.len()).any(|i| {
                bound_at(beta, i, j) && schema.contains(&(atoms[beta].predicate, i + 1))
            });
            if !index_bound {
                return false;
            }
            // (ii) fully bound, or no later component member would be fully
            // bound if placed here.
            if !all_bound_at(beta, j) {
                let preempted = members
                    .iter()
                    .any(|&gamma| positions[gamma] > j && all_bound_at(gamma, j));
                if preempted {
                    return false;
                }
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Random planner inputs for differential and determinism testing.
// ---------------------------------------------------------------------------

/// A random input, both as parsed structures and as the file contents the
/// CLI consumes.
pub struct RandomInput {
    pub program_text: String,
    pub constraints_text: String,
    pub strategy_text: String,
    pub input: PlannerInput,
    /// The oracle workload `prod (|B(r)| - fixed)! * 2^|indexable \ I|`.
    pub workload: u128,
}

/// Generates a planner input within the given oracle workload, resampling
/// as needed. Up to 8 predicates, up to 4 rules of up to 5 atoms, random
/// keys, costs, strategy, and occasional pinned positions/indices.
pub fn random_input(seed: u64, max_workload: u128) -> RandomInput {
    let mut rng = SplitMix64::seed_from_u64(seed);
    loop {
        if let Some(found) = try_random_input(&mut rng, max_workload) {
            return found;
        }
    }
}

fn try_random_input(rng: &mut SplitMix64, max_workload: u128) -> Option<RandomInput> {
    let edb_names = ["p0", "p1", "p2", "p3", "p4"];
    let arities: Vec<usize> = (0..edb_names.len()).map(|_| rng.random_range(1..=3)).collect();
    let vars = ["X", "Y", "Z", "W"];
    let rule_count = rng.random_range(1..=4);
    let mut text = String::new();
    let mut rule_sizes = Vec::new();
    for r in 0..rule_count {
        let atom_count = rng.random_range(1..=5);
        rule_sizes.push(atom_count);
        let mut body_atoms: Vec<String> = Vec::new();
        let mut body_vars: Vec<&str> = Vec::new();
        for _ in 0..atom_count {
            // Occasionally join on a previously defined head predicate to
            // get recursion into play.
            let (name, arity) = if r > 0 && rng.random_range(0..5) == 0 {
                (format!("h{}", rng.random_range(0..r)), 1usize)
            } else {
                let k = rng.random_range(0..edb_names.len());
                (edb_names[k].to_string(), arities[k])
            };
            let mut args = Vec::new();
            for _ in 0..arity {
                if rng.random_range(0..6) == 0 {
                    args.push(rng.random_range(1..=3).to_string());
                } else {
                    let v = vars[rng.random_range(0..vars.len())];
                    body_vars.push(v);
                    args.push(v.to_string());
                }
            }
            if arity == 0 {
                body_atoms.push(name);
            } else {
                body_atoms.push(format!("{}({})", name, args.join(",")));
            }
        }
        body_vars.sort();
        body_vars.dedup();
        let head_arity = body_vars.len().min(1 + rng.random_range(0..2));
        let head = if head_arity == 0 {
            format!("h{}", r)
        } else {
            format!("h{}({})", r, body_vars[..head_arity].join(","))
        };
        text.push_str(&format!("{} :- {}.\n", head, body_atoms.join(", ")));
    }

    let program = evalplan::parser::parse_program(&text).ok()?;
    let indexable = indexable_arguments(&program);

    // Random strategy: a shuffled non-empty subsequence of w1..w4.
    let mut fns = vec!["w1", "w2", "w3", "w4"];
    for i in (1..fns.len()).rev() {
        fns.swap(i, rng.random_range(0..=i));
    }
    let strategy_text = fns[..rng.random_range(1..=4)].join(",");
    let strategy = Strategy::parse(&strategy_text).expect("generated strategy");

    // Random costs and keys over the indexable arguments, rendered as
    // constraint facts so the CLI path sees the same input.
    let mut constraints = String::new();
    let mut builder = PlannerInput::builder(program.clone()).strategy(strategy);
    let entries: Vec<ArgRef> = indexable.iter().copied().collect();
    for &entry in &entries {
        let tag = program.pred(entry.pred).tag();
        let cost = rng.random_range(0..=20u64);
        constraints.push_str(&format!("index(\"{}\",{},{}).\n", tag, entry.arg, cost));
        builder = builder.cost(entry, cost).ok()?;
        if rng.random_range(0..4) == 0 {
            constraints.push_str(&format!("key(\"{}\",{}).\n", tag, entry.arg));
            builder = builder.key(entry).ok()?;
        }
    }
    let mut fixed_count = vec![0usize; rule_count];
    if rule_count > 0 && rng.random_range(0..5) == 0 {
        let rule_id = rng.random_range(0..rule_count);
        let body_len = rule_sizes[rule_id];
        let body_idx = rng.random_range(0..body_len);
        let pos = rng.random_range(1..=body_len);
        let atom_text = program.atom_text(&program.rules[rule_id].body[body_idx].atom);
        // The constraint file resolves atoms by text, which may hit an
        // earlier duplicate; keep builder and file consistent by resolving
        // the same way.
        let resolved = program
            .rules[rule_id]
            .body
            .iter()
            .position(|l| program.atom_text(&l.atom) == atom_text)
            .expect("atom exists");
        constraints.push_str(&format!("fixedPosition({},\"{}\",{}).\n", rule_id, atom_text, pos));
        builder = builder.fix_position(rule_id, resolved, pos).ok()?;
        fixed_count[rule_id] = 1;
    }
    if !entries.is_empty() && rng.random_range(0..5) == 0 {
        let entry = entries[rng.random_range(0..entries.len())];
        let tag = program.pred(entry.pred).tag();
        constraints.push_str(&format!("fixedIndex(\"{}\",{}).\n", tag, entry.arg));
        builder = builder.fix_index(entry).ok()?;
    }

    let input = builder.build().ok()?;
    let fixed_indices = input.fixed_indices().len();
    let candidates = indexable.iter().filter(|e| !input.fixed_indices().contains(e)).count();
    let mut workload: u128 = 1;
    for (r, &size) in rule_sizes.iter().enumerate() {
        let free = size - fixed_count[r];
        workload = workload.saturating_mul((1..=free as u128).product::<u128>().max(1));
    }
    workload = workload.saturating_mul(1u128 << candidates.min(100));
    let _ = fixed_indices;
    if workload > max_workload {
        return None;
    }
    Some(RandomInput {
        program_text: text,
        constraints_text: constraints,
        strategy_text,
        input,
        workload,
    })
}
