//! Exact global solvers for the variance-maximizing adjustment.
//!
//! All three solvers take a [`NormalizedGroup`] (rewards sorted non-increasing,
//! probabilities summing to one) and return the maximizer in sorted order.
//! [`solve_one_pass`] and [`solve_enumeration`] both search the block-form
//! vertices `(M^k, alpha^(l-k), m^(n-l))`; [`solve_vertex_oracle`] derives
//! vertices from the raw constraint system and is used to cross-check them.

mod enumeration;
mod one_pass;
mod vertex;

use alloc::vec::Vec;

use crate::config::{Algorithm, SolverConfig};
use crate::error::{Error, Result};
use crate::group::NormalizedGroup;
use crate::sum;

pub use enumeration::solve_enumeration;
pub use one_pass::solve_one_pass;
pub use vertex::{solve_vertex_oracle, VERTEX_ORACLE_MAX_N};

/// Optimal adjusted rewards in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedSolution {
    pub z_star: Vec<f64>,
    /// `sum_i p_i z_i^2` evaluated on `z_star`.
    pub f_star: f64,
    /// Number of leading entries at the upper bound.
    pub k: usize,
    /// Index one past the last entry above the lower-bound block.
    pub l: usize,
    /// Plateau value of entries `k..l`; `None` when that block is empty.
    pub alpha: Option<f64>,
    /// Accepted moves (one-pass), candidates examined (enumeration) or linear
    /// systems solved (oracle).
    pub iterations: usize,
}

impl AdjustedSolution {
    /// Number of distinct values in `z_star`.
    pub fn distinct_values(&self) -> usize {
        let mut count = 0;
        let mut last = None;
        for &z in &self.z_star {
            if last != Some(z) {
                count += 1;
                last = Some(z);
            }
        }
        count
    }
}

/// One accepted state of the one-pass walk; the first entry is the start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchStep {
    pub k: usize,
    pub l: usize,
    pub alpha: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchTrace {
    pub steps: Vec<SearchStep>,
}

/// `sum_i p_i z_i^2` with compensated accumulation.
pub fn objective(z: &[f64], p: &[f64]) -> Result<f64> {
    if z.len() != p.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            actual: z.len(),
        });
    }
    Ok(sum::sum(z.iter().zip(p).map(|(z, p)| p * z * z)))
}

/// Runs the solver selected by `cfg.algorithm`.
pub fn solve(ng: &NormalizedGroup, cfg: &SolverConfig) -> Result<AdjustedSolution> {
    match cfg.algorithm {
        Algorithm::OnePass => solve_one_pass(ng, cfg).map(|(s, _)| s),
        Algorithm::Enumeration => solve_enumeration(ng, cfg),
        Algorithm::Oracle => solve_vertex_oracle(ng, cfg),
    }
}

/// Prefix-sum view of a sorted group, shared by the block-form solvers.
pub(crate) struct Blocks<'a> {
    pub ng: &'a NormalizedGroup,
    /// `cum[i] = p_1 + ... + p_i`.
    pub cum: Vec<f64>,
}

impl<'a> Blocks<'a> {
    pub fn new(ng: &'a NormalizedGroup) -> Self {
        Self {
            ng,
            cum: sum::prefix_sums(&ng.sorted_probs),
        }
    }

    pub fn n(&self) -> usize {
        self.ng.len()
    }

    /// `(S_A, S_B, S_C)` for a split at `(k, l)`.
    #[inline]
    pub fn masses(&self, k: usize, l: usize) -> (f64, f64, f64) {
        let total = self.cum[self.n()];
        (self.cum[k], self.cum[l] - self.cum[k], total - self.cum[l])
    }

    /// Mean residual `c - M S_A - m S_C` left for the middle block.
    #[inline]
    pub fn residual(&self, s_a: f64, s_c: f64) -> f64 {
        self.ng.mean - self.ng.upper * s_a - self.ng.lower * s_c
    }

    #[inline]
    pub fn block_objective(&self, s_a: f64, s_b: f64, s_c: f64, alpha: f64) -> f64 {
        let (m, big_m) = (self.ng.lower, self.ng.upper);
        s_a * big_m * big_m + s_b * alpha * alpha + s_c * m * m
    }

    #[inline]
    pub fn alpha_feasible(&self, alpha: f64, tol: f64) -> bool {
        alpha >= self.ng.lower - tol && alpha <= self.ng.upper + tol
    }

    /// Materializes the block vector for `(k, l, alpha)`.
    pub fn solution(&self, k: usize, l: usize, alpha: Option<f64>, iterations: usize) -> AdjustedSolution {
        let n = self.n();
        let alpha = alpha.map(|a| a.clamp(self.ng.lower, self.ng.upper));
        // a plateau sitting on a bound is the same point as the merged split
        let (k, l) = match alpha {
            Some(a) if k < l && a == self.ng.upper => (l, l),
            Some(a) if k < l && a == self.ng.lower => (k, k),
            _ => (k, l),
        };
        let mut z = Vec::with_capacity(n);
        z.resize(k, self.ng.upper);
        z.resize(l, alpha.unwrap_or(self.ng.upper));
        z.resize(n, self.ng.lower);
        let f_star = sum::sum(z.iter().zip(&self.ng.sorted_probs).map(|(z, p)| p * z * z));
        AdjustedSolution {
            z_star: z,
            f_star,
            k,
            l,
            alpha: if k < l { alpha } else { None },
            iterations,
        }
    }
}
