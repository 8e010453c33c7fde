//! Group-relative advantages: rewards standardized within their group.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sum;

pub const DEFAULT_EPS_STD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageGroup {
    pub advantages: Vec<f64>,
    pub mean_used: f64,
    /// Population (divide-by-n) standard deviation.
    pub std_used: f64,
    /// Set when the spread fell below `eps_std`; advantages are then all zero.
    pub degenerate: bool,
}

/// `A_i = (r_i - mean) / std` with the population standard deviation.
pub fn group_advantages(rewards: &[f64], eps_std: f64) -> Result<AdvantageGroup> {
    if rewards.is_empty() {
        return Err(Error::EmptyGroup);
    }
    if !rewards.iter().all(|r| r.is_finite()) {
        return Err(Error::non_finite("rewards"));
    }
    if !(eps_std >= 0.0 && eps_std.is_finite()) {
        return Err(Error::non_finite("eps_std"));
    }
    let n = rewards.len() as f64;
    let mean = sum::sum(rewards.iter().copied()) / n;
    let var = sum::sum(rewards.iter().map(|r| (r - mean) * (r - mean))) / n;
    let std = libm::sqrt(var);

    if std < eps_std || std == 0.0 {
        return Ok(AdvantageGroup {
            advantages: alloc::vec![0.0; rewards.len()],
            mean_used: mean,
            std_used: std,
            degenerate: true,
        });
    }
    let scale = std.max(eps_std);
    Ok(AdvantageGroup {
        advantages: rewards.iter().map(|r| (r - mean) / scale).collect(),
        mean_used: mean,
        std_used: std,
        degenerate: false,
    })
}
