//! Reformulation and benchmarking toolkit for STRIPS PDDL domain models.
//!
//! The crate reads domain and problem files while keeping the textual order
//! of every element, reorders those elements under explicit configurations
//! or operator-ordering heuristics, composes and positions macro-operators,
//! and measures external planners on the resulting models.

pub mod bench;
pub mod config;
mod digest;
pub mod heuristics;
pub mod macros;
pub mod pddl;
pub mod report;
pub mod sexpr;
pub mod tune;

pub use bench::{PlannerSpec, RunLimits, RunRecord};
pub use config::{
    apply_configuration, configuration_of, decode_precedence, random_configuration, space_size,
    vector_dimension, ConfigurationSpec, PrecedenceVector,
};
pub use digest::derive_seed;
pub use heuristics::{order_operators, HeuristicId};
pub use macros::{compose_chain, insert_at, MacroRecipe, Placement};
pub use pddl::{parse_domain, parse_problem, print_domain, DomainModel, OperatorSchema, ProblemModel};
pub use report::{summarize, wilcoxon_signed_rank, MetricsSummary};
pub use tune::{TuneBudget, TuneResult};
