use thiserror::Error;

use crate::exactlp::Farkas;
use crate::rational::{format, Rational};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} exceeds the configured limit of {limit}")]
    ScaleExceeded { what: String, limit: usize },

    #[error("empty support candidate")]
    EmptySupport,

    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("oracle answers are inconsistent: {0}")]
    OracleInconsistent(String),

    #[error(
        "marginals violate the covering condition for {member} by {}",
        format(gap)
    )]
    InfeasibleMarginals { member: String, gap: Rational },

    #[error(
        "marginals are not in the feasible region: {member} is violated by {}",
        format(gap)
    )]
    NotInYStar { member: String, gap: Rational },

    #[error("iteration bound {limit} exceeded; the support oracle is defective")]
    IterationOverflow { limit: usize },

    #[error(
        "decomposition already exceeds the marginal of {element} by {}",
        format(excess)
    )]
    DeficitNegative { element: String, excess: Rational },

    #[error("the set family cannot be enumerated")]
    FamilyNotEnumerable,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "supply total {} differs from demand total {}",
        format(supply),
        format(demand)
    )]
    BalanceMismatch { supply: Rational, demand: Rational },

    /// Carries the LP infeasibility certificate when one was produced.
    #[error("hypergraph is not balanced: {reason}")]
    NotBalanced {
        reason: String,
        certificate: Option<Box<Farkas>>,
    },

    #[error("marginals sum to {}, expected the committee size {k}", format(total))]
    CardinalityMismatch { total: Rational, k: usize },

    #[error("{groups} groups exceed the committee size {k}")]
    TooManyGroups { groups: usize, k: usize },

    #[error("no path from {source_node} to {sink}")]
    NoPath { source_node: String, sink: String },

    #[error("attacker cannot be deterred: {0}")]
    NotDeterable(String),

    #[error("invariant violated: {0}")]
    InvariantViolated(String),
}
