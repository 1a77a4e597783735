//! Solvers built on the decomposition machinery: inspection strategies for
//! security games, robust randomized coverage, and committee elections with
//! a fixed committee size.

pub mod committee;
pub mod coverage;
pub mod security;
