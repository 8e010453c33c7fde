use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::group::NormalizedGroup;

use super::{AdjustedSolution, Blocks};

/// Evaluates every split `0 <= k <= l <= n` and keeps the best feasible one.
///
/// Exact ties in the objective go to the smallest `k`, then the largest `l`.
/// The sorted rewards themselves are the starting incumbent, so the result is
/// never worse than leaving the group unchanged.
pub fn solve_enumeration(ng: &NormalizedGroup, cfg: &SolverConfig) -> Result<AdjustedSolution> {
    cfg.validate()?;
    let n = ng.len();
    if n == 0 {
        return Err(Error::EmptyGroup);
    }
    let blocks = Blocks::new(ng);
    let tol = cfg.feas_tol;
    let mean_tol = tol * ng.mean.abs().max(1.0);

    let fallback_f = ng.original_objective();
    let mut best: Option<(f64, usize, usize, Option<f64>)> = None;
    let mut examined = 0usize;

    for k in 0..=n {
        for l in (k..=n).rev() {
            examined += 1;
            let (s_a, s_b, s_c) = blocks.masses(k, l);
            let residual = blocks.residual(s_a, s_c);
            let candidate = if k == l {
                (residual.abs() <= mean_tol).then(|| (blocks.block_objective(s_a, 0.0, s_c, 0.0), None))
            } else if s_b > 0.0 {
                let alpha = residual / s_b;
                blocks.alpha_feasible(alpha, tol).then(|| {
                    let a = alpha.clamp(ng.lower, ng.upper);
                    (blocks.block_objective(s_a, s_b, s_c, a), Some(a))
                })
            } else {
                None
            };
            if let Some((f, alpha)) = candidate {
                if best.is_none_or(|(bf, ..)| f > bf) {
                    best = Some((f, k, l, alpha));
                }
            }
        }
    }

    match best {
        Some((f, k, l, alpha)) if f >= fallback_f - cfg.obj_tol * fallback_f.abs().max(1.0) => {
            Ok(blocks.solution(k, l, alpha, examined))
        }
        Some(_) | None => {
            // unreachable for a valid group: (0, n) with alpha = c is always feasible
            debug_assert!(false, "enumeration found no vertex above the input rewards");
            Err(Error::InfeasibleGroup)
        }
    }
}
