//! Solver-facing interop: the fact-stream representation of planner inputs,
//! parsing of plan answers (`setIndex`/`pos` atoms), annotation emission,
//! and the constraint-fact file format (`fixedPosition`, `fixedIndex`,
//! `key`, `index`, `relation`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ast::{Atom, Term};
use crate::plan::{ArgRef, EvaluationPlan, IndexingSchema, Ordering, PlannerInput, PlannerInputBuilder};
use crate::program::Program;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Renders a planner input as the fact stream consumed by the external
/// solver encoding. Facts come in groups separated by blank lines: one group
/// per rule (`rule`, `headAtom`, `bodyAtom`, `sameVariable`, `constant`),
/// then the database group (`relation`, `index`), then pinned
/// positions/indices and keys, then the strategy's `priorityCostFunction`
/// facts. Strings are whitespace-free; no spaces follow commas.
pub fn emit_asp_facts(input: &PlannerInput) -> String {
    let program = input.program();
    let mut groups: Vec<String> = Vec::new();

    for rule in &program.rules {
        let mut lines = Vec::new();
        lines.push(format!(
            "rule({},{},{}).",
            rule.id,
            quote(&program.rule_text(rule)),
            rule.body.len()
        ));
        let head_text = program.atom_text(&rule.head);
        lines.push(format!(
            "headAtom({},{},{}).",
            rule.id,
            quote(&head_text),
            quote(&program.pred(rule.head.predicate).tag())
        ));
        for lit in &rule.body {
            lines.push(format!(
                "bodyAtom({},{},{}).",
                rule.id,
                quote(&program.atom_text(&lit.atom)),
                quote(&program.pred(lit.atom.predicate).tag())
            ));
        }
        // Shared variables over every pair of atoms, head included; each
        // unordered pair once, in source-order orientation.
        let atoms: Vec<&Atom> =
            std::iter::once(&rule.head).chain(rule.body.iter().map(|l| &l.atom)).collect();
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                for (ai, ti) in atoms[i].terms.iter().enumerate() {
                    let Term::Variable(v) = ti else { continue };
                    for (aj, tj) in atoms[j].terms.iter().enumerate() {
                        if tj.as_variable() == Some(v.as_str()) {
                            lines.push(format!(
                                "sameVariable({},{},{},{},{}).",
                                rule.id,
                                quote(&program.atom_text(atoms[i])),
                                ai + 1,
                                quote(&program.atom_text(atoms[j])),
                                aj + 1
                            ));
                        }
                    }
                }
            }
        }
        for atom in &atoms {
            for (i, term) in atom.terms.iter().enumerate() {
                if term.is_constant() {
                    lines.push(format!(
                        "constant({},{},{}).",
                        rule.id,
                        quote(&program.atom_text(atom)),
                        i + 1
                    ));
                }
            }
        }
        groups.push(lines.join("\n"));
    }

    {
        let mut lines = Vec::new();
        let mut order: Vec<usize> = (0..program.predicates.len()).collect();
        order.sort_by_key(|&i| (&program.predicates[i].name, program.predicates[i].arity));
        for i in order {
            let pred = &program.predicates[i];
            lines.push(format!("relation({},{}).", quote(&pred.tag()), pred.arity));
        }
        let mut entries: Vec<(ArgRef, u64)> =
            input.index_costs().iter().map(|(&e, &c)| (e, c)).collect();
        entries.sort_by(|a, b| a.0.sort_key(program).cmp(&b.0.sort_key(program)));
        for (entry, cost) in entries {
            lines.push(format!(
                "index({},{},{}).",
                quote(&program.pred(entry.pred).tag()),
                entry.arg,
                cost
            ));
        }
        if !lines.is_empty() {
            groups.push(lines.join("\n"));
        }
    }

    {
        let mut lines = Vec::new();
        for rule in &program.rules {
            if let Some(assignment) = input.assignment(rule.id) {
                let mut pins: Vec<(usize, usize)> =
                    assignment.iter().map(|(b, p)| (p, b)).collect();
                pins.sort();
                for (pos, body_idx) in pins {
                    lines.push(format!(
                        "fixedPosition({},{},{}).",
                        rule.id,
                        quote(&program.atom_text(&rule.body[body_idx].atom)),
                        pos
                    ));
                }
            }
        }
        let sorted = |set: &BTreeSet<ArgRef>| {
            let mut v: Vec<ArgRef> = set.iter().copied().collect();
            v.sort_by(|a, b| a.sort_key(program).cmp(&b.sort_key(program)));
            v
        };
        for entry in sorted(input.fixed_indices()) {
            lines.push(format!(
                "fixedIndex({},{}).",
                quote(&program.pred(entry.pred).tag()),
                entry.arg
            ));
        }
        for entry in sorted(input.keys()) {
            lines.push(format!(
                "key({},{}).",
                quote(&program.pred(entry.pred).tag()),
                entry.arg
            ));
        }
        if !lines.is_empty() {
            groups.push(lines.join("\n"));
        }
    }

    {
        let lines: Vec<String> = input
            .strategy()
            .priority_levels()
            .map(|(f, level)| format!("priorityCostFunction({},{}).", f.number(), level))
            .collect();
        groups.push(lines.join("\n"));
    }

    let mut out = groups.join("\n\n");
    out.push('\n');
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteropError {
    pub message: String,
}

impl InteropError {
    fn new(message: impl Into<String>) -> Self {
        InteropError { message: message.into() }
    }
}

impl fmt::Display for InteropError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for InteropError {}

/// A ground argument in an answer-set atom.
#[derive(Debug, Clone, PartialEq, Eq)]
enum AnswerTerm {
    Int(i64),
    Str(String),
}

impl AnswerTerm {
    fn as_int(&self, what: &str) -> Result<i64, InteropError> {
        match self {
            AnswerTerm::Int(n) => Ok(*n),
            AnswerTerm::Str(s) => {
                Err(InteropError::new(format!("expected an integer {}, found \"{}\"", what, s)))
            }
        }
    }

    fn as_str(&self, what: &str) -> Result<&str, InteropError> {
        match self {
            AnswerTerm::Str(s) => Ok(s),
            AnswerTerm::Int(n) => {
                Err(InteropError::new(format!("expected a string {}, found {}", what, n)))
            }
        }
    }
}

/// Scans `name(arg,...)` atoms out of whitespace-separated answer text,
/// honoring quotes and escapes inside string arguments.
fn scan_answer_atoms(text: &str) -> Result<Vec<(String, Vec<AnswerTerm>)>, InteropError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    loop {
        while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            return Ok(out);
        }
        let mut name = String::new();
        while matches!(chars.peek(), Some(c) if c.is_ascii_alphanumeric() || *c == '_') {
            name.push(chars.next().unwrap());
        }
        if name.is_empty() {
            return Err(InteropError::new(format!(
                "unexpected character `{}` in answer text",
                chars.peek().unwrap()
            )));
        }
        if chars.peek() != Some(&'(') {
            return Err(InteropError::new(format!("atom `{}` has no arguments", name)));
        }
        chars.next();
        let mut args = Vec::new();
        loop {
            while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
                chars.next();
            }
            match chars.peek() {
                Some('"') => {
                    chars.next();
                    let mut s = String::new();
                    loop {
                        match chars.next() {
                            None => return Err(InteropError::new("unterminated string in answer")),
                            Some('\\') => match chars.next() {
                                Some(e) => s.push(e),
                                None => {
                                    return Err(InteropError::new("unterminated string in answer"))
                                }
                            },
                            Some('"') => break,
                            Some(c) => s.push(c),
                        }
                    }
                    args.push(AnswerTerm::Str(s));
                }
                Some(c) if c.is_ascii_digit() || *c == '-' => {
                    let mut digits = String::new();
                    if *c == '-' {
                        digits.push(chars.next().unwrap());
                    }
                    while matches!(chars.peek(), Some(d) if d.is_ascii_digit()) {
                        digits.push(chars.next().unwrap());
                    }
                    let n = digits
                        .parse::<i64>()
                        .map_err(|_| InteropError::new(format!("bad integer `{}`", digits)))?;
                    args.push(AnswerTerm::Int(n));
                }
                other => {
                    return Err(InteropError::new(format!(
                        "unexpected `{:?}` inside atom `{}`",
                        other, name
                    )))
                }
            }
            while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
                chars.next();
            }
            match chars.next() {
                Some(',') => continue,
                Some(')') => break,
                other => {
                    return Err(InteropError::new(format!(
                        "expected `,` or `)` in atom `{}`, found `{:?}`",
                        name, other
                    )))
                }
            }
        }
        out.push((name, args));
    }
}

/// Parses a solver answer (whitespace-separated ground `setIndex/2` and
/// `pos/3` atoms) into an evaluation plan for `program`.
pub fn parse_plan_answer(text: &str, program: &Program) -> Result<EvaluationPlan, InteropError> {
    let mut schema = IndexingSchema::new();
    // rule id -> atom string -> positions claimed for that string
    let mut claims: BTreeMap<usize, BTreeMap<String, Vec<usize>>> = BTreeMap::new();
    for (name, args) in scan_answer_atoms(text)? {
        match (name.as_str(), args.as_slice()) {
            ("setIndex", [tag, arg]) => {
                let tag = tag.as_str("predicate tag")?;
                let arg = arg.as_int("argument")?;
                let pred = program
                    .pred_by_tag(tag)
                    .ok_or_else(|| InteropError::new(format!("unknown predicate \"{}\"", tag)))?;
                if arg < 1 || arg as usize > program.pred(pred).arity {
                    return Err(InteropError::new(format!(
                        "argument {} out of range for \"{}\"",
                        arg, tag
                    )));
                }
                schema.insert(ArgRef::new(pred, arg as usize));
            }
            ("pos", [atom, rule, pos]) => {
                let atom = atom.as_str("atom")?;
                let rule = rule.as_int("rule id")?;
                let pos = pos.as_int("position")?;
                if rule < 0 || pos < 1 {
                    return Err(InteropError::new(format!(
                        "bad pos atom: pos(\"{}\",{},{})",
                        atom, rule, pos
                    )));
                }
                claims
                    .entry(rule as usize)
                    .or_default()
                    .entry(atom.to_string())
                    .or_default()
                    .push(pos as usize);
            }
            (other, args) => {
                return Err(InteropError::new(format!(
                    "unexpected atom `{}/{}` in answer (only setIndex/2 and pos/3 are accepted)",
                    other,
                    args.len()
                )))
            }
        }
    }

    let mut orderings = BTreeMap::new();
    for (rule_id, mut by_atom) in claims {
        let rule = program
            .rules
            .get(rule_id)
            .ok_or_else(|| InteropError::new(format!("unknown rule id {}", rule_id)))?;
        let mut positions = vec![0usize; rule.body.len()];
        for (body_idx, lit) in rule.body.iter().enumerate() {
            let text = program.atom_text(&lit.atom);
            let slot = by_atom.get_mut(&text).and_then(|v| {
                v.sort();
                if v.is_empty() {
                    None
                } else {
                    Some(v.remove(0))
                }
            });
            match slot {
                Some(pos) => positions[body_idx] = pos,
                None => {
                    return Err(InteropError::new(format!(
                        "rule {}: no position for body atom \"{}\"",
                        rule_id, text
                    )))
                }
            }
        }
        for (atom, leftovers) in by_atom {
            if !leftovers.is_empty() {
                return Err(InteropError::new(format!(
                    "rule {}: unknown or surplus atom \"{}\" in answer",
                    rule_id, atom
                )));
            }
        }
        let ordering = Ordering::new(rule_id, positions)
            .map_err(|e| InteropError::new(format!("rule {}: {}", rule_id, e)))?;
        orderings.insert(rule_id, ordering);
    }
    Ok(EvaluationPlan { schema, orderings })
}

/// Renders a plan as the answer-set projection accepted by
/// [`parse_plan_answer`]; the two are mutually inverse on wellformed plans.
pub fn render_plan_answer(plan: &EvaluationPlan, program: &Program) -> String {
    let mut parts = Vec::new();
    for entry in plan.schema.sorted_entries(program) {
        parts.push(format!(
            "setIndex({},{})",
            quote(&program.pred(entry.pred).tag()),
            entry.arg
        ));
    }
    for (&rule_id, ordering) in &plan.orderings {
        let rule = &program.rules[rule_id];
        let order = ordering.by_position();
        for (pos0, body_idx) in order.into_iter().enumerate() {
            parts.push(format!(
                "pos({},{},{})",
                quote(&program.atom_text(&rule.body[body_idx].atom)),
                rule_id,
                pos0 + 1
            ));
        }
    }
    parts.join(" ")
}

/// Annotates a program with its plan: `%@index(pred/arity,arg).` directives
/// for the schema and one `%@order(rule,[atoms...]).` directive per planned
/// rule, ahead of the rule. Annotations are comments to the base parser, so
/// the output re-parses to the same program.
pub fn emit_annotations(program: &Program, plan: &EvaluationPlan) -> String {
    let mut out = String::from("% evaluation plan annotations\n");
    for entry in plan.schema.sorted_entries(program) {
        out.push_str(&format!(
            "%@index({},{}).\n",
            program.pred(entry.pred).tag(),
            entry.arg
        ));
    }
    for rule in &program.rules {
        if let Some(ordering) = plan.ordering(rule.id) {
            let atoms: Vec<String> = ordering
                .by_position()
                .into_iter()
                .map(|body_idx| program.atom_text(&rule.body[body_idx].atom))
                .collect();
            out.push_str(&format!("%@order({},[{}]).\n", rule.id, atoms.join(",")));
        }
        out.push_str(&program.rule_text(rule));
        out.push('\n');
    }
    for fact in &program.facts {
        out.push_str(&program.atom_text(fact));
        out.push_str(".\n");
    }
    out
}

/// Constraint facts accepted as planner input, in the solver vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlannerFacts {
    pub relations: Vec<(String, usize)>,
    /// (rule id, atom text, position)
    pub fixed_positions: Vec<(usize, String, usize)>,
    pub fixed_indices: Vec<(String, usize)>,
    pub keys: Vec<(String, usize)>,
    pub costs: Vec<(String, usize, u64)>,
}

/// Parses a constraint file: ground facts over `relation/2`, `index/3`,
/// `key/2`, `fixedIndex/2`, `fixedPosition/3`.
pub fn parse_planner_facts(text: &str) -> Result<PlannerFacts, InteropError> {
    let program = crate::parser::parse_program(text)
        .map_err(|e| InteropError::new(format!("constraint file: {}", e)))?;
    if !program.rules.is_empty() {
        return Err(InteropError::new("constraint file must contain only facts"));
    }
    let unquote = |t: &Term, what: &str| -> Result<String, InteropError> {
        match t {
            Term::Constant(crate::ast::Constant::Str(raw)) => {
                let inner = &raw[1..raw.len() - 1];
                let mut s = String::new();
                let mut chars = inner.chars();
                while let Some(c) = chars.next() {
                    if c == '\\' {
                        if let Some(e) = chars.next() {
                            s.push(e);
                        }
                    } else {
                        s.push(c);
                    }
                }
                Ok(s)
            }
            other => Err(InteropError::new(format!("expected a quoted {}, found {:?}", what, other))),
        }
    };
    let as_int = |t: &Term, what: &str| -> Result<i64, InteropError> {
        match t {
            Term::Constant(crate::ast::Constant::Int(n)) => Ok(*n),
            other => Err(InteropError::new(format!("expected an integer {}, found {:?}", what, other))),
        }
    };
    let mut facts = PlannerFacts::default();
    for atom in &program.facts {
        let name = program.pred(atom.predicate).name.as_str();
        match (name, atom.terms.as_slice()) {
            ("relation", [tag, arity]) => {
                facts
                    .relations
                    .push((unquote(tag, "predicate tag")?, as_int(arity, "arity")? as usize));
            }
            ("index", [tag, arg, cost]) => {
                facts.costs.push((
                    unquote(tag, "predicate tag")?,
                    as_int(arg, "argument")? as usize,
                    as_int(cost, "cost")? as u64,
                ));
            }
            ("key", [tag, arg]) => {
                facts.keys.push((unquote(tag, "predicate tag")?, as_int(arg, "argument")? as usize));
            }
            ("fixedIndex", [tag, arg]) => {
                facts
                    .fixed_indices
                    .push((unquote(tag, "predicate tag")?, as_int(arg, "argument")? as usize));
            }
            ("fixedPosition", [rule, atom_text, pos]) => {
                facts.fixed_positions.push((
                    as_int(rule, "rule id")? as usize,
                    unquote(atom_text, "atom")?,
                    as_int(pos, "position")? as usize,
                ));
            }
            (other, terms) => {
                return Err(InteropError::new(format!(
                    "unsupported constraint fact `{}/{}`",
                    other,
                    terms.len()
                )))
            }
        }
    }
    Ok(facts)
}

/// Applies parsed constraint facts to a planner-input builder, resolving
/// predicate tags and atom strings against the builder's program (which the
/// file's `relation` facts may extend).
pub fn apply_planner_facts(
    mut builder: PlannerInputBuilder,
    facts: &PlannerFacts,
) -> Result<PlannerInputBuilder, InteropError> {
    for (tag, arity) in &facts.relations {
        let (name, declared) = tag
            .rsplit_once('/')
            .ok_or_else(|| InteropError::new(format!("bad predicate tag \"{}\"", tag)))?;
        let declared: usize = declared
            .parse()
            .map_err(|_| InteropError::new(format!("bad predicate tag \"{}\"", tag)))?;
        if declared != *arity {
            return Err(InteropError::new(format!(
                "relation(\"{}\",{}) disagrees with its tag",
                tag, arity
            )));
        }
        builder = builder
            .declare_relation(name, *arity)
            .map_err(|e| InteropError::new(e.to_string()))?;
    }
    fn resolve(
        builder: &PlannerInputBuilder,
        tag: &str,
        arg: usize,
    ) -> Result<ArgRef, InteropError> {
        let pred = builder
            .program()
            .pred_by_tag(tag)
            .ok_or_else(|| InteropError::new(format!("unknown predicate \"{}\"", tag)))?;
        Ok(ArgRef::new(pred, arg))
    }
    for (tag, arg, cost) in &facts.costs {
        let entry = resolve(&builder, tag, *arg)?;
        builder = builder.cost(entry, *cost).map_err(|e| InteropError::new(e.to_string()))?;
    }
    for (tag, arg) in &facts.keys {
        let entry = resolve(&builder, tag, *arg)?;
        builder = builder.key(entry).map_err(|e| InteropError::new(e.to_string()))?;
    }
    for (tag, arg) in &facts.fixed_indices {
        let entry = resolve(&builder, tag, *arg)?;
        builder = builder.fix_index(entry).map_err(|e| InteropError::new(e.to_string()))?;
    }
    for (rule_id, atom_text, pos) in &facts.fixed_positions {
        let body_idx = {
            let program = builder.program();
            let rule = program
                .rules
                .get(*rule_id)
                .ok_or_else(|| InteropError::new(format!("unknown rule id {}", rule_id)))?;
            rule.body
                .iter()
                .position(|l| program.atom_text(&l.atom) == *atom_text)
                .ok_or_else(|| {
                    InteropError::new(format!(
                        "rule {} has no body atom \"{}\"",
                        rule_id, atom_text
                    ))
                })?
        };
        builder = builder
            .fix_position(*rule_id, body_idx, *pos)
            .map_err(|e| InteropError::new(e.to_string()))?;
    }
    Ok(builder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::Strategy;
    use crate::parser::parse_program;
    use crate::plan::PlannerInput;

    fn two_rule_program() -> Program {
        parse_program("h1(X) :- a(X,Y),b(Y).\nh2(Y) :- a(Y,X).").unwrap()
    }

    const PAPER_FACTS: &str = "\
rule(0,\"h1(X):-a(X,Y),b(Y).\",2).
headAtom(0,\"h1(X)\",\"h1/1\").
bodyAtom(0,\"a(X,Y)\",\"a/2\").
bodyAtom(0,\"b(Y)\",\"b/1\").
sameVariable(0,\"h1(X)\",1,\"a(X,Y)\",1).
sameVariable(0,\"a(X,Y)\",2,\"b(Y)\",1).

rule(1,\"h2(Y):-a(Y,X).\",1).
headAtom(1,\"h2(Y)\",\"h2/1\").
bodyAtom(1,\"a(Y,X)\",\"a/2\").
sameVariable(1,\"h2(Y)\",1,\"a(Y,X)\",1).";

    #[test]
    fn emits_the_reference_rule_facts_byte_for_byte() {
        let input = PlannerInput::with_defaults(two_rule_program());
        let out = emit_asp_facts(&input);
        assert!(
            out.starts_with(PAPER_FACTS),
            "emitted stream does not start with the reference facts:\n{}",
            out
        );
    }

    #[test]
    fn priority_facts_follow_strategy_order() {
        let input = PlannerInput::builder(two_rule_program())
            .strategy(Strategy::parse("w1,w3,w2").unwrap())
            .build()
            .unwrap();
        let out = emit_asp_facts(&input);
        let expected =
            "priorityCostFunction(1,3).\npriorityCostFunction(3,2).\npriorityCostFunction(2,1).\n";
        assert!(out.ends_with(expected), "stream tail:\n{}", out);
    }

    #[test]
    fn fact_only_program_emits_only_relations() {
        let input = PlannerInput::with_defaults(parse_program("p(1). q(2,3).").unwrap());
        let out = emit_asp_facts(&input);
        // No rules, no indexable arguments, no keys: relations plus priority.
        let mut lines = out.lines().filter(|l| !l.is_empty());
        assert_eq!(lines.next(), Some("relation(\"p/1\",1)."));
        assert_eq!(lines.next(), Some("relation(\"q/2\",2)."));
        assert!(lines.next().unwrap().starts_with("priorityCostFunction("));
    }

    #[test]
    fn constants_and_fixed_inputs_are_emitted() {
        let program = parse_program("h(X) :- a(X,1), b(X).").unwrap();
        let a = program.pred_id("a").unwrap();
        let input = PlannerInput::builder(program.clone())
            .fix_position(0, 1, 2)
            .unwrap()
            .fix_index(ArgRef::new(a, 2))
            .unwrap()
            .key(ArgRef::new(a, 1))
            .unwrap()
            .build()
            .unwrap();
        let out = emit_asp_facts(&input);
        assert!(out.contains("constant(0,\"a(X,1)\",2)."), "{}", out);
        assert!(out.contains("fixedPosition(0,\"b(X)\",2)."), "{}", out);
        assert!(out.contains("fixedIndex(\"a/2\",2)."), "{}", out);
        assert!(out.contains("key(\"a/2\",1)."), "{}", out);
    }

    #[test]
    fn distinct_programs_emit_distinct_streams() {
        let a = PlannerInput::with_defaults(parse_program("h(X) :- a(X,Y), b(Y).").unwrap());
        let b = PlannerInput::with_defaults(parse_program("h(X) :- a(X,Y), b(X).").unwrap());
        assert_ne!(emit_asp_facts(&a), emit_asp_facts(&b));
    }

    #[test]
    fn answer_round_trip() {
        let program =
            parse_program("h(X,Z,W) :- a(X,Z), b(V,W), c(Z), d(V), e(Y,Z).").unwrap();
        let plan = EvaluationPlan {
            schema: IndexingSchema::from_entries([
                ArgRef::new(program.pred_id("c").unwrap(), 1),
                ArgRef::new(program.pred_id("d").unwrap(), 1),
                ArgRef::new(program.pred_id("e").unwrap(), 2),
            ]),
            orderings: BTreeMap::from([(0, Ordering::new(0, vec![3, 1, 4, 2, 5]).unwrap())]),
        };
        let text = render_plan_answer(&plan, &program);
        assert!(text.contains("setIndex(\"c/1\",1)"));
        assert!(text.contains("pos(\"b(V,W)\",0,1)"));
        let back = parse_plan_answer(&text, &program).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn empty_answer_is_the_empty_plan() {
        let program = parse_program("p(1).").unwrap();
        let plan = parse_plan_answer("", &program).unwrap();
        assert_eq!(plan, EvaluationPlan::empty());
    }

    #[test]
    fn duplicate_positions_rejected() {
        let program = parse_program("h(X) :- a(X,Y), b(Y).").unwrap();
        let err = parse_plan_answer(
            "pos(\"a(X,Y)\",0,1) pos(\"b(Y)\",0,1)",
            &program,
        )
        .unwrap_err();
        assert!(err.message.contains("duplicate position"), "{}", err);
    }

    #[test]
    fn unknown_atom_rejected() {
        let program = parse_program("h(X) :- a(X,Y), b(Y).").unwrap();
        let err = parse_plan_answer("pos(\"zz(Q)\",0,1)", &program).unwrap_err();
        assert!(err.message.contains("no position for body atom") || err.message.contains("surplus"));
    }

    #[test]
    fn duplicate_body_atoms_resolve_in_source_order() {
        let program = parse_program("h(X) :- a(X,Y), a(X,Y).").unwrap();
        let plan =
            parse_plan_answer("pos(\"a(X,Y)\",0,2) pos(\"a(X,Y)\",0,1)", &program).unwrap();
        assert_eq!(plan.ordering(0).unwrap().sequence(), &[1, 2]);
    }

    #[test]
    fn annotations_match_the_reference_shape() {
        let program =
            parse_program("h(X,Z,W) :- a(X,Z), b(V,W), c(Z), d(V), e(Y,Z).").unwrap();
        let plan = EvaluationPlan {
            schema: IndexingSchema::from_entries([
                ArgRef::new(program.pred_id("c").unwrap(), 1),
                ArgRef::new(program.pred_id("d").unwrap(), 1),
                ArgRef::new(program.pred_id("e").unwrap(), 2),
            ]),
            orderings: BTreeMap::from([(0, Ordering::new(0, vec![3, 1, 4, 2, 5]).unwrap())]),
        };
        let out = emit_annotations(&program, &plan);
        assert!(out.contains("%@order(0,[b(V,W),d(V),a(X,Z),c(Z),e(Y,Z)]).\n"), "{}", out);
        assert!(out.contains("%@index(c/1,1).\n"));
        assert!(out.contains("%@index(d/1,1).\n"));
        assert!(out.contains("%@index(e/2,2).\n"));
        assert_eq!(out.matches("%@index").count(), 3);
        // Annotations are comments: the output re-parses to the same program.
        let back = parse_program(&out).unwrap();
        assert_eq!(back.rules, program.rules);
    }

    #[test]
    fn empty_plan_annotation_keeps_program() {
        let program = parse_program("p(1). q(X) :- p(X).").unwrap();
        let out = emit_annotations(&program, &EvaluationPlan::empty());
        assert!(out.starts_with("% evaluation plan annotations\n"));
        // Interning order may differ, so compare canonical text.
        let back = parse_program(&out).unwrap();
        assert_eq!(back.text(), program.text());
    }

    #[test]
    fn constraint_facts_round_trip_into_builder() {
        let text = "\
relation(\"big/2\",2).
index(\"a/2\",2,30).
key(\"a/2\",1).
fixedIndex(\"a/2\",2).
fixedPosition(0,\"b(Y)\",1).
";
        let facts = parse_planner_facts(text).unwrap();
        assert_eq!(facts.relations, vec![("big/2".to_string(), 2)]);
        let program = parse_program("h(X) :- a(X,Y), b(Y).").unwrap();
        let builder = PlannerInput::builder(program.clone());
        let builder = apply_planner_facts(builder, &facts).unwrap();
        let input = builder.build().unwrap();
        let a = program.pred_id("a").unwrap();
        assert_eq!(input.cost(ArgRef::new(a, 2)), Some(30));
        assert!(input.keys().contains(&ArgRef::new(a, 1)));
        assert!(input.fixed_indices().contains(&ArgRef::new(a, 2)));
        assert_eq!(input.assignment(0).unwrap().position_of(1), Some(1));
        assert!(input.program().pred_by_tag("big/2").is_some());
    }

    #[test]
    fn constraint_file_rejects_rules_and_unknown_kinds() {
        assert!(parse_planner_facts("p(X) :- q(X).").is_err());
        assert!(parse_planner_facts("whatever(\"a/2\",1).").is_err());
    }
}
