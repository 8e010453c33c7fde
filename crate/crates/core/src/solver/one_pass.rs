use alloc::vec::Vec;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::group::NormalizedGroup;

use super::{AdjustedSolution, Blocks, SearchStep, SearchTrace};

/// Greedy walk from `(k, l) = (0, n)` toward the centre.
///
/// Each round evaluates raising the top plateau entry to `M` (`k + 1`) and
/// dropping the bottom plateau entry to `m` (`l - 1`), and takes whichever
/// feasible move has the larger objective gain, provided the gain is positive. A move is feasible when the remaining plateau keeps positive mass
/// and its value stays in `[m, M]`. Every accepted move strictly increases the
/// objective and shrinks the plateau by one, so there are fewer than `n`
/// rounds after the O(n) prefix-sum pass.
pub fn solve_one_pass(ng: &NormalizedGroup, cfg: &SolverConfig) -> Result<(AdjustedSolution, SearchTrace)> {
    cfg.validate()?;
    let n = ng.len();
    if n == 0 {
        return Err(Error::EmptyGroup);
    }
    let blocks = Blocks::new(ng);
    let cum = &blocks.cum;
    let tol = cfg.feas_tol;
    let (m, big_m) = (ng.lower, ng.upper);

    let (mut k, mut l) = (0usize, n);
    let mut steps: Vec<SearchStep> = Vec::new();
    let mut alpha;
    let mut accepted = 0usize;

    loop {
        let (s_a, s_b, s_c) = blocks.masses(k, l);
        if s_b <= 0.0 {
            // only reachable if the start already has no plateau mass
            return Err(Error::InfeasibleGroup);
        }
        alpha = blocks.residual(s_a, s_c) / s_b;
        let f = blocks.block_objective(s_a, s_b, s_c, alpha);
        if steps.is_empty() {
            steps.push(SearchStep { k, l, alpha, f });
        }

        // Moving entry j out of the plateau changes f by exactly
        // p_j S_B (M - alpha)^2 / S_B' (to the top block) or
        // p_j S_B (alpha - m)^2 / S_B' (to the bottom block). Comparing these
        // gains instead of differences of f keeps tiny improvements near a
        // bound from being lost to rounding.
        let mut best: Option<(f64, usize, usize, f64)> = None;
        let mut best_gain = 0.0;

        if k < l {
            let s_b_new = cum[l] - cum[k + 1];
            if s_b_new > 0.0 {
                let a = blocks.residual(cum[k + 1], s_c) / s_b_new;
                let gain = ng.sorted_probs[k] * s_b * (big_m - alpha) * (big_m - alpha) / s_b_new;
                if blocks.alpha_feasible(a, tol) && gain > best_gain {
                    best_gain = gain;
                    best = Some((gain, k + 1, l, a));
                }
            }
        }
        if l > k {
            let s_b_new = cum[l - 1] - cum[k];
            if s_b_new > 0.0 {
                let a = blocks.residual(s_a, cum[n] - cum[l - 1]) / s_b_new;
                let gain = ng.sorted_probs[l - 1] * s_b * (alpha - m) * (alpha - m) / s_b_new;
                if blocks.alpha_feasible(a, tol) && gain > best_gain {
                    best = Some((gain, k, l - 1, a));
                }
            }
        }

        match best {
            Some((_, k_new, l_new, a)) => {
                k = k_new;
                l = l_new;
                accepted += 1;
                assert!(accepted < n, "one-pass search exceeded its iteration bound");
                let (s_a, s_b, s_c) = blocks.masses(k, l);
                steps.push(SearchStep {
                    k,
                    l,
                    alpha: a,
                    f: blocks.block_objective(s_a, s_b, s_c, a),
                });
            }
            None => break,
        }
    }

    let solution = blocks.solution(k, l, Some(alpha), accepted);
    Ok((solution, SearchTrace { steps }))
}
