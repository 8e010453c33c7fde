use rayon::prelude::*;

use super::trainer::{train, TrainRun, TrainerConfig};
use super::SimWorld;
use crate::error::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSummary {
    pub step: usize,
    pub grpo_mean: f64,
    pub grpo_std: f64,
    pub grpovi_mean: f64,
    pub grpovi_std: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    pub checkpoints: Vec<CheckpointSummary>,
    /// Threshold is the initial mean expected reward plus `threshold_delta`.
    pub threshold: f64,
    pub grpo_steps_to_threshold: f64,
    pub grpovi_steps_to_threshold: f64,
    pub grpo_runs: Vec<TrainRun>,
    pub grpovi_runs: Vec<TrainRun>,
}

/// First step whose mean expected reward reaches `threshold`; runs that never
/// reach it count as `curve.len()` (one past the last step).
pub fn steps_to_threshold(curve: &[f64], threshold: f64) -> usize {
    curve.iter().position(|&r| r >= threshold).unwrap_or(curve.len())
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Paired GRPO vs GRPOVI runs: each seed trains both arms from the same world
/// and sampling seed, differing only in `use_adjustment`.
pub fn compare_grpo_grpovi(
    world: &SimWorld,
    cfg_base: &TrainerConfig,
    seeds: &[u64],
    threshold_delta: f64,
) -> Result<ComparisonReport, SimError> {
    if seeds.len() < 2 {
        return Err(SimError::InvalidConfig("at least two seeds are required".into()));
    }
    let arm = |adjust: bool| -> Result<Vec<TrainRun>, SimError> {
        let cfg = TrainerConfig {
            use_adjustment: adjust,
            ..cfg_base.clone()
        };
        seeds
            .par_iter()
            .map(|&s| train(&world.with_rng_seed(s), &cfg))
            .collect()
    };
    let grpo_runs = arm(false)?;
    let grpovi_runs = arm(true)?;

    let checkpoints = (0..grpo_runs[0].records.len())
        .map(|c| {
            let (grpo_mean, grpo_std) = mean_std(grpo_runs.iter().map(|r| r.records[c].mean_expected_reward));
            let (grpovi_mean, grpovi_std) = mean_std(grpovi_runs.iter().map(|r| r.records[c].mean_expected_reward));
            CheckpointSummary {
                step: grpo_runs[0].records[c].step,
                grpo_mean,
                grpo_std,
                grpovi_mean,
                grpovi_std,
            }
        })
        .collect();

    let threshold = grpo_runs[0].reward_curve[0] + threshold_delta;
    let avg_steps = |runs: &[TrainRun]| {
        runs.iter()
            .map(|r| steps_to_threshold(&r.reward_curve, threshold) as f64)
            .sum::<f64>()
            / runs.len() as f64
    };
    Ok(ComparisonReport {
        seeds: seeds.to_vec(),
        checkpoints,
        threshold,
        grpo_steps_to_threshold: avg_steps(&grpo_runs),
        grpovi_steps_to_threshold: avg_steps(&grpovi_runs),
        grpo_runs,
        grpovi_runs,
    })
}
