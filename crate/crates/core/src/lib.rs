//! Evaluation planning for Datalog.
//!
//! Given a program, a database (or statistics about one), and domain
//! knowledge such as keys and index-build costs, the planner computes an
//! *evaluation plan*: a global indexing schema for the database plus one
//! admissible body ordering per rule, optimal under a lexicographic cost
//! strategy. A semi-naive bottom-up engine evaluates programs while honoring
//! a plan, so the memory effect of index choices can be measured directly.
//!
//! The crate is organized along the pipeline:
//!
//! - [`parser`] / [`program`]: text to validated programs;
//! - [`plan`]: orderings, indexing schemas, planner inputs, plan files;
//! - [`admissibility`]: rule hypergraphs, component separation, well-ordering;
//! - [`cost`]: the cost functions `w1`–`w4` and lexicographic strategies;
//! - [`optimizer`]: exact branch-and-bound search plus an exhaustive oracle;
//! - [`stats`]: deriving index costs and key candidates from a sample database;
//! - [`interop`]: solver-facing fact streams, answer parsing, annotations;
//! - [`engine`]: plan-driven semi-naive evaluation with memory metrics;
//! - [`bench`]: built-in benchmark generators and the comparison harness;
//! - [`cli`]: the `evalplan` command-line interface.

pub mod admissibility;
pub mod ast;
pub mod bench;
pub mod cli;
pub mod cost;
pub mod engine;
pub mod interop;
pub mod optimizer;
pub mod parser;
pub mod plan;
pub mod program;
pub mod stats;

pub use ast::{Atom, Constant, Literal, PredId, Predicate, Rule, Term};
pub use parser::{parse_program, parse_program_with, ParseError, Profile};
pub use plan::{ArgRef, EvaluationPlan, IndexingSchema, Ordering, PlannerInput, PositionAssignment};
pub use program::Program;
