//! Distributions over subsets with prescribed marginals and covering
//! requirements.
//!
//! Given a ground set `E`, a family of members `P ⊆ E` with requirements
//! `π_P ≤ 1`, and marginals `ρ ∈ [0,1]^E`, the crate computes a probability
//! distribution over subsets of `E` in which every element `e` is included
//! with probability exactly `ρ_e` and every member `P` is hit with probability
//! at least `π_P`. All arithmetic is exact.
//!
//! The generic loop lives in [`engine`]; the family-specific modules provide
//! support candidates for it:
//!
//! * [`supermodular`]: all subsets with a supermodular requirement function,
//! * [`abstract_network`]: ordered families closed under crossing, including
//!   s-t paths in a digraph,
//! * [`lattice`]: lattice polyhedra, including rooted cuts of a graph,
//! * [`balanced`]: balanced hypergraphs, via perfect decompositions.
//!
//! [`apps`] builds three solvers on top of these.

#![allow(clippy::result_large_err)]

pub mod abstract_network;
pub mod apps;
pub mod balanced;
pub mod engine;
pub mod error;
pub mod exactlp;
pub mod lattice;
pub mod limits;
pub mod model;
pub mod rational;
pub mod subset;
pub mod supermodular;

pub use engine::{
    check_star, decompose, decompose_with, lift_marginals, verify, EngineOptions, Outcome, Report,
};
pub use error::{Error, Result};
pub use limits::Limits;
pub use model::{
    AscOracle, Decomposition, ExplicitSystem, Instance, Marginals, Requirements, ResidualState,
    SetSystem, StarCheck,
};
pub use rational::Rational;
pub use subset::{GroundSet, Subset};
