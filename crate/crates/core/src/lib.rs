//! Mean-preserving, order-preserving reward adjustment that maximizes the
//! probability-weighted second moment of a response group.
//!
//! Given rewards `r_1 >= ... >= r_n` in `[m, M]` and probabilities `p_i > 0`,
//! the adjusted rewards solve
//!
//! ```text
//! max  sum_i p_i z_i^2
//! s.t. m <= z_i <= M,  sum_i p_i z_i = sum_i p_i r_i,  z_1 >= z_2 >= ... >= z_n
//! ```
//!
//! Because the mean is fixed, maximizing the second moment maximizes the
//! variance. The maximum is attained at a vertex of the feasible polytope and
//! every vertex has the block form `(M, .., M, alpha, .., alpha, m, .., m)`,
//! so the adjusted rewards take at most three distinct values.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod advantage;
pub mod config;
pub mod error;
pub mod group;
pub mod pipeline;
pub mod solver;
pub mod sum;

pub use advantage::{group_advantages, AdvantageGroup, DEFAULT_EPS_STD};
pub use config::{Algorithm, SolverConfig, TiePolicy};
pub use error::{Error, Result};
pub use group::{normalize, unsort, NormalizedGroup, ProbSpec, RewardGroup};
pub use pipeline::{adjust_batch, adjust_group, AdjustmentResult};
pub use solver::{
    objective, solve, solve_enumeration, solve_one_pass, solve_vertex_oracle, AdjustedSolution, SearchStep,
    SearchTrace, VERTEX_ORACLE_MAX_N,
};
