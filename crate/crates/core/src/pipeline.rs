//! Normalize, sort, solve and map back to the caller's response order.

use alloc::string::String;
use alloc::vec::Vec;

use crate::config::{Algorithm, SolverConfig, TiePolicy};
use crate::error::Result;
use crate::group::{normalize, unsort, RewardGroup};
use crate::solver::{self, AdjustedSolution};
use crate::sum;

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustmentResult {
    pub group_id: String,
    /// Adjusted rewards in the original response order.
    pub adjusted_rewards: Vec<f64>,
    /// `sum_i p_i z_i^2` of the adjusted rewards.
    pub objective: f64,
    /// Same objective for the input rewards, under the same probabilities.
    pub original_objective: f64,
    /// Split descriptors in sorted order of the full group.
    pub k: usize,
    pub l: usize,
    pub alpha: Option<f64>,
    pub algorithm_used: Algorithm,
}

/// Adjusts one group's rewards.
///
/// Under [`TiePolicy::Merge`], equal input rewards are pooled into a single
/// pseudo-response whose adjusted value is shared by every member.
pub fn adjust_group(group: &RewardGroup, cfg: &SolverConfig) -> Result<AdjustmentResult> {
    cfg.validate()?;
    let ng = normalize(group, cfg)?;

    let (z_sorted, k, l, alpha) = match cfg.tie_policy {
        TiePolicy::Free => {
            let AdjustedSolution {
                z_star, k, l, alpha, ..
            } = solver::solve(&ng, cfg)?;
            (z_star, k, l, alpha)
        }
        TiePolicy::Merge => {
            let (merged, membership) = ng.merge_ties();
            let sol = solver::solve(&merged, cfg)?;
            let z: Vec<f64> = membership.iter().map(|&j| sol.z_star[j]).collect();
            let k = membership.iter().filter(|&&j| j < sol.k).count();
            let l = membership.iter().filter(|&&j| j < sol.l).count();
            (z, k, l, sol.alpha)
        }
    };

    let objective = sum::sum(z_sorted.iter().zip(&ng.sorted_probs).map(|(z, p)| p * z * z));
    Ok(AdjustmentResult {
        group_id: group.group_id.clone(),
        adjusted_rewards: unsort(&z_sorted, &ng.perm)?,
        objective,
        original_objective: ng.original_objective(),
        k,
        l,
        alpha,
        algorithm_used: cfg.algorithm,
    })
}

/// Adjusts each group independently; a failing group does not affect the
/// others. Results are in input order.
pub fn adjust_batch(groups: &[RewardGroup], cfg: &SolverConfig) -> Vec<Result<AdjustmentResult>> {
    groups.iter().map(|g| adjust_group(g, cfg)).collect()
}
