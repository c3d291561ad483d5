//! Syntax tree for the Datalog fragment handled by the planner.
//!
//! Predicates are interned: an [`Atom`] carries a [`PredId`] into the owning
//! [`Program`](crate::program::Program)'s predicate table. Everything here is
//! an immutable value object once parsing is done.

use std::fmt;

/// Interned predicate identifier; index into the program's predicate table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredId(pub u32);

impl PredId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A predicate symbol together with its arity. `(name, arity)` is unique
/// within a program; reusing a name with a different arity is a parse error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
    /// True when the predicate never occurs in a rule head.
    pub is_edb: bool,
}

impl Predicate {
    /// Solver-facing rendering, e.g. `a/2`.
    pub fn tag(&self) -> String {
        format!("{}/{}", self.name, self.arity)
    }
}

/// A ground value: integer, lowercase symbolic constant, or quoted string.
///
/// String constants keep their raw quoted lexeme so that rendering an atom
/// reproduces the source spelling exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Int(i64),
    Sym(String),
    Str(String),
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(n) => write!(f, "{}", n),
            Constant::Sym(s) => write!(f, "{}", s),
            Constant::Str(s) => write!(f, "{}", s),
        }
    }
}

/// A term is either a variable (uppercase-initial) or a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Variable(String),
    Constant(Constant),
}

impl Term {
    pub fn as_variable(&self) -> Option<&str> {
        match self {
            Term::Variable(v) => Some(v),
            Term::Constant(_) => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Term::Constant(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Variable(v) => write!(f, "{}", v),
            Term::Constant(c) => write!(f, "{}", c),
        }
    }
}

/// A predicate applied to terms. `terms.len()` always equals the arity
/// recorded for `predicate`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: PredId,
    pub terms: Vec<Term>,
}

impl Atom {
    pub fn is_ground(&self) -> bool {
        self.terms.iter().all(Term::is_constant)
    }

    /// Variables in argument order, repeats included.
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(Term::as_variable)
    }
}

/// A body literal: an atom, possibly under `not`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Literal {
    pub atom: Atom,
    pub negative: bool,
}

/// A rule `head :- body.` with a non-empty body. Bodyless statements are
/// facts and live in `Program::facts` instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    /// Dense id, assigned in source order starting at 0.
    pub id: usize,
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl Rule {
    /// Atoms of the positive body, in source order.
    pub fn positive_body(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter(|l| !l.negative).map(|l| &l.atom)
    }

    pub fn is_positive(&self) -> bool {
        self.body.iter().all(|l| !l.negative)
    }
}
