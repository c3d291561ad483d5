//! Recursive-descent parser for the planner's Datalog fragment.
//!
//! Grammar (one statement per `.`, `%` starts a line comment):
//!
//! ```text
//! statement := atom "."                      // fact (must be ground)
//!            | atom ":-" literal {"," literal} "."
//! literal   := ["not"] atom
//! atom      := ident ["(" term {"," term} ")"]
//! term      := VARIABLE | ident | INTEGER | STRING
//! ```
//!
//! Identifiers are lowercase-initial, variables uppercase-initial. `not` is
//! accepted by the full profile and rejected by the planner profile, which
//! only admits positive rules.

use std::collections::HashMap;
use std::fmt;

use crate::ast::{Atom, Constant, Literal, PredId, Predicate, Rule, Term};
use crate::program::Program;

/// Which language profile to enforce while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Positive rules only; `not` is a parse error.
    Planner,
    /// Stratified negation allowed (checked later, by the engine).
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    ArityClash {
        predicate: String,
        first: usize,
        second: usize,
    },
    UnsafeRule {
        variable: String,
    },
    NegationNotSupported,
    NonGroundFact {
        variable: String,
    },
    IntOutOfRange(String),
}

/// A parse failure with its source location (1-based line and column).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: ", self.line, self.column)?;
        match &self.kind {
            ParseErrorKind::Syntax(msg) => write!(f, "{}", msg),
            ParseErrorKind::ArityClash { predicate, first, second } => write!(
                f,
                "predicate `{}` used with arity {} but previously with arity {}",
                predicate, second, first
            ),
            ParseErrorKind::UnsafeRule { variable } => write!(
                f,
                "unsafe rule: variable `{}` does not occur in the positive body",
                variable
            ),
            ParseErrorKind::NegationNotSupported => {
                write!(f, "`not` is not allowed in the planner profile")
            }
            ParseErrorKind::NonGroundFact { variable } => write!(
                f,
                "unsafe rule: fact contains the variable `{}`",
                variable
            ),
            ParseErrorKind::IntOutOfRange(tok) => {
                write!(f, "integer literal `{}` out of range", tok)
            }
        }
    }
}

impl std::error::Error for ParseError {}

/// Parses a program in the planner profile (positive rules only).
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    parse_program_with(text, Profile::Planner)
}

/// Parses a program in the given profile.
pub fn parse_program_with(text: &str, profile: Profile) -> Result<Program, ParseError> {
    Parser::new(text, profile).program()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Implies, // :-
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{}`", s),
            Tok::Var(s) => format!("variable `{}`", s),
            Tok::Int(n) => format!("integer `{}`", n),
            Tok::Str(s) => format!("string {}", s),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Implies => "`:-`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { chars: text.chars().peekable(), line: 1, column: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.chars.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('%') => {
                    while let Some(&c) = self.chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError { line: self.line, column: self.column, kind: ParseErrorKind::Syntax(msg.into()) }
    }

    /// Next token plus the position where it starts.
    fn next_token(&mut self) -> Result<(Tok, usize, usize), ParseError> {
        self.skip_trivia();
        let (line, column) = (self.line, self.column);
        let c = match self.chars.peek() {
            None => return Ok((Tok::Eof, line, column)),
            Some(&c) => c,
        };
        let tok = match c {
            '(' => {
                self.bump();
                Tok::LParen
            }
            ')' => {
                self.bump();
                Tok::RParen
            }
            ',' => {
                self.bump();
                Tok::Comma
            }
            '.' => {
                self.bump();
                Tok::Dot
            }
            ':' => {
                self.bump();
                match self.chars.peek() {
                    Some('-') => {
                        self.bump();
                        Tok::Implies
                    }
                    _ => return Err(self.err("expected `-` after `:`")),
                }
            }
            '"' => {
                self.bump();
                let mut raw = String::from('"');
                loop {
                    match self.bump() {
                        None => return Err(self.err("unterminated string literal")),
                        Some('\\') => {
                            raw.push('\\');
                            match self.bump() {
                                None => return Err(self.err("unterminated string literal")),
                                Some(e) => raw.push(e),
                            }
                        }
                        Some('"') => {
                            raw.push('"');
                            break;
                        }
                        Some(c) => raw.push(c),
                    }
                }
                Tok::Str(raw)
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::new();
                while let Some(&d) = self.chars.peek() {
                    if d.is_ascii_digit() {
                        digits.push(d);
                        self.bump();
                    } else {
                        break;
                    }
                }
                match digits.parse::<i64>() {
                    Ok(n) => Tok::Int(n),
                    Err(_) => {
                        return Err(ParseError {
                            line,
                            column,
                            kind: ParseErrorKind::IntOutOfRange(digits),
                        })
                    }
                }
            }
            c if c.is_ascii_lowercase() => Tok::Ident(self.word()),
            c if c.is_ascii_uppercase() => Tok::Var(self.word()),
            c => return Err(self.err(format!("unexpected character `{}`", c))),
        };
        Ok((tok, line, column))
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    tok_line: usize,
    tok_column: usize,
    profile: Profile,
    predicates: Vec<Predicate>,
    by_name: HashMap<String, PredId>,
    pred_sites: Vec<(usize, usize)>, // where each predicate was first seen
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, profile: Profile) -> Self {
        Parser {
            lexer: Lexer::new(text),
            tok: Tok::Eof,
            tok_line: 1,
            tok_column: 1,
            profile,
            predicates: Vec::new(),
            by_name: HashMap::new(),
            pred_sites: Vec::new(),
        }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let (tok, line, column) = self.lexer.next_token()?;
        self.tok = tok;
        self.tok_line = line;
        self.tok_column = column;
        Ok(())
    }

    fn err_here(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.tok_line, column: self.tok_column, kind }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if self.tok == want {
            self.advance()
        } else {
            Err(self.err_here(ParseErrorKind::Syntax(format!(
                "expected {}, found {}",
                want.describe(),
                self.tok.describe()
            ))))
        }
    }

    fn program(mut self) -> Result<Program, ParseError> {
        self.advance()?;
        let mut rules: Vec<Rule> = Vec::new();
        let mut facts: Vec<Atom> = Vec::new();
        while self.tok != Tok::Eof {
            let (line, column) = (self.tok_line, self.tok_column);
            let head = self.atom()?;
            match self.tok {
                Tok::Dot => {
                    self.advance()?;
                    if let Some(v) = head.variables().next() {
                        return Err(ParseError {
                            line,
                            column,
                            kind: ParseErrorKind::NonGroundFact { variable: v.to_string() },
                        });
                    }
                    facts.push(head);
                }
                Tok::Implies => {
                    self.advance()?;
                    let mut body = vec![self.literal()?];
                    while self.tok == Tok::Comma {
                        self.advance()?;
                        body.push(self.literal()?);
                    }
                    self.expect(Tok::Dot)?;
                    let rule = Rule { id: rules.len(), head, body };
                    self.check_safety(&rule, line, column)?;
                    rules.push(rule);
                }
                _ => {
                    return Err(self.err_here(ParseErrorKind::Syntax(format!(
                        "expected `.` or `:-`, found {}",
                        self.tok.describe()
                    ))))
                }
            }
        }
        Ok(Program::assemble(rules, facts, self.predicates))
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let negative = match &self.tok {
            Tok::Ident(name) if name == "not" => {
                if self.profile == Profile::Planner {
                    return Err(self.err_here(ParseErrorKind::NegationNotSupported));
                }
                self.advance()?;
                true
            }
            _ => false,
        };
        Ok(Literal { atom: self.atom()?, negative })
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let (line, column) = (self.tok_line, self.tok_column);
        let name = match std::mem::replace(&mut self.tok, Tok::Eof) {
            Tok::Ident(name) => name,
            other => {
                self.tok = other;
                return Err(self.err_here(ParseErrorKind::Syntax(format!(
                    "expected a predicate name, found {}",
                    self.tok.describe()
                ))));
            }
        };
        self.advance()?;
        let mut terms = Vec::new();
        if self.tok == Tok::LParen {
            self.advance()?;
            terms.push(self.term()?);
            while self.tok == Tok::Comma {
                self.advance()?;
                terms.push(self.term()?);
            }
            self.expect(Tok::RParen)?;
        }
        let predicate = self.intern(name, terms.len(), line, column)?;
        Ok(Atom { predicate, terms })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let term = match std::mem::replace(&mut self.tok, Tok::Eof) {
            Tok::Var(v) => Term::Variable(v),
            Tok::Ident(s) => Term::Constant(Constant::Sym(s)),
            Tok::Int(n) => Term::Constant(Constant::Int(n)),
            Tok::Str(s) => Term::Constant(Constant::Str(s)),
            other => {
                self.tok = other;
                return Err(self.err_here(ParseErrorKind::Syntax(format!(
                    "expected a term, found {}",
                    self.tok.describe()
                ))));
            }
        };
        self.advance()?;
        Ok(term)
    }

    fn intern(
        &mut self,
        name: String,
        arity: usize,
        line: usize,
        column: usize,
    ) -> Result<PredId, ParseError> {
        if let Some(&id) = self.by_name.get(&name) {
            let known = self.predicates[id.index()].arity;
            if known != arity {
                return Err(ParseError {
                    line,
                    column,
                    kind: ParseErrorKind::ArityClash { predicate: name, first: known, second: arity },
                });
            }
            return Ok(id);
        }
        let id = PredId(self.predicates.len() as u32);
        self.predicates.push(Predicate { name: name.clone(), arity, is_edb: true });
        self.by_name.insert(name, id);
        self.pred_sites.push((line, column));
        Ok(id)
    }

    /// Safety: every variable of the rule must occur in the positive body.
    fn check_safety(&self, rule: &Rule, line: usize, column: usize) -> Result<(), ParseError> {
        let mut positive_vars: Vec<&str> = Vec::new();
        for atom in rule.positive_body() {
            positive_vars.extend(atom.variables());
        }
        let offender = rule
            .head
            .variables()
            .chain(rule.body.iter().filter(|l| l.negative).flat_map(|l| l.atom.variables()))
            .find(|v| !positive_vars.contains(v));
        match offender {
            Some(v) => Err(ParseError {
                line,
                column,
                kind: ParseErrorKind::UnsafeRule { variable: v.to_string() },
            }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rules_and_assigns_dense_ids() {
        let p = parse_program("h1(X) :- a(X,Y), b(Y).  h2(Y) :- a(Y,X).").unwrap();
        assert_eq!(p.rules.len(), 2);
        assert_eq!(p.rules[0].id, 0);
        assert_eq!(p.rules[1].id, 1);
        assert_eq!(p.facts.len(), 0);
        let tags: Vec<String> = p.predicates.iter().map(|pr| pr.tag()).collect();
        assert!(tags.contains(&"h1/1".to_string()));
        assert!(tags.contains(&"h2/1".to_string()));
        assert!(tags.contains(&"a/2".to_string()));
        assert!(tags.contains(&"b/1".to_string()));
    }

    #[test]
    fn fact_only_program() {
        let p = parse_program("p(1).").unwrap();
        assert_eq!(p.rules.len(), 0);
        assert_eq!(p.facts.len(), 1);
        let pid = p.pred_id("p").unwrap();
        assert!(p.predicates[pid.index()].is_edb);
    }

    #[test]
    fn zero_arity_atoms() {
        let p = parse_program("p :- q(1).").unwrap();
        assert_eq!(p.rules.len(), 1);
        assert_eq!(p.predicates[p.rules[0].head.predicate.index()].arity, 0);
    }

    #[test]
    fn arity_clash_is_an_error() {
        let err = parse_program("p(1). p(1,2).").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::ArityClash { .. }));
    }

    #[test]
    fn unsafe_rule_names_the_variable() {
        let err = parse_program("h(X,Z) :- a(X).").unwrap_err();
        match err.kind {
            ParseErrorKind::UnsafeRule { variable } => assert_eq!(variable, "Z"),
            other => panic!("unexpected error {:?}", other),
        }
    }

    #[test]
    fn non_ground_fact_rejected() {
        let err = parse_program("p(X).").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::NonGroundFact { .. }));
    }

    #[test]
    fn planner_profile_rejects_negation() {
        let err = parse_program("p(X) :- q(X), not r(X).").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NegationNotSupported);
        let p = parse_program_with("p(X) :- q(X), not r(X).", Profile::Full).unwrap();
        assert!(p.rules[0].body[1].negative);
    }

    #[test]
    fn unsafe_negative_variable_rejected_in_full_profile() {
        let err = parse_program_with("p(X) :- q(X), not r(Y).", Profile::Full).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::UnsafeRule { .. }));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_program("p(1)\nq(2).").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.column, 1);
    }

    #[test]
    fn string_constants_keep_raw_lexeme() {
        let p = parse_program("p(\"a b\").").unwrap();
        match &p.facts[0].terms[0] {
            Term::Constant(Constant::Str(s)) => assert_eq!(s, "\"a b\""),
            other => panic!("unexpected term {:?}", other),
        }
    }

    #[test]
    fn comments_are_skipped() {
        let p = parse_program("% header\np(1). % trailing\n% q(2).\n").unwrap();
        assert_eq!(p.facts.len(), 1);
    }
}
