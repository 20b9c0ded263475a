//! STRIPS-with-typing PDDL: an order-preserving model, parser, printer,
//! grounding and plan validation.

mod ground;
mod model;
mod parse;
mod print;

pub use ground::{
    apply_action, ground_task, parse_plan, validate_plan, validate_plan_lifted, ActionId, AtomId,
    GroundAction, GroundTask, PlanStep, State, ValidationReport,
};
pub use model::{
    Atom, DomainModel, Literal, OperatorSchema, PredicateDecl, ProblemModel, TypedName, EQUALITY,
};
pub use parse::{check_problem, parse_domain, parse_problem, SUPPORTED_REQUIREMENTS};
pub use print::{print_domain, print_operator, print_problem};

use crate::sexpr::Pos;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PddlError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("unsupported requirement `{tag}` at {pos}")]
    UnsupportedRequirement { tag: String, pos: Pos },
    #[error("unsupported construct `{what}` at {pos}")]
    Unsupported { what: String, pos: Pos },
    #[error("undeclared predicate `{name}` in {context}")]
    UndeclaredPredicate { name: String, context: String },
    #[error("predicate `{name}` expects {expected} arguments, found {found} in {context}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        context: String,
    },
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("variable `{name}` in operator `{operator}` is not a parameter")]
    UndeclaredVariable { name: String, operator: String },
    #[error("undeclared object `{name}` in {context}")]
    UndeclaredObject { name: String, context: String },
    #[error("undeclared type `{name}`")]
    UndeclaredType { name: String },
    #[error("goal must be nonempty")]
    EmptyGoal,
    #[error("problem is for domain `{found}` but the domain is `{expected}`")]
    DomainMismatch { expected: String, found: String },
}
