//! Multi-seed GRPO / GRPOVI runs flattened into CSV checkpoint rows.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::SimError;
use crate::sim::{steps_to_threshold, train, SimWorld, TrainRun, TrainerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Grpo,
    Grpovi,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Grpo => "grpo",
            Arm::Grpovi => "grpovi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointRow {
    pub arm: Arm,
    pub seed: u64,
    /// 1-based checkpoint index.
    pub checkpoint: usize,
    pub step: usize,
    pub mean_expected_reward: f64,
    pub mean_reward_variance: f64,
    pub kl_to_reference: f64,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub arm: Arm,
    pub final_mean: f64,
    pub final_std: f64,
    /// Mean over seeds; runs that never reach the threshold count as
    /// `steps + 1`.
    pub mean_steps_to_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub rows: Vec<CheckpointRow>,
    pub summaries: Vec<ArmSummary>,
    pub threshold: f64,
}

/// Trains every `(arm, seed)` pair on `world` re-seeded with `seed`.
pub fn run_simulation(
    world: &SimWorld,
    base: &TrainerConfig,
    arms: &[Arm],
    seeds: &[u64],
    threshold_delta: f64,
) -> Result<Simulation, SimError> {
    base.validate()?;
    let initial = world.initial_policy();
    let moments = crate::sim::exact_reward_moments(&initial, world, None)?;
    let threshold = moments.means.iter().sum::<f64>() / world.num_prompts as f64 + threshold_delta;

    let jobs: Vec<(Arm, u64)> = arms.iter().flat_map(|&a| seeds.iter().map(move |&s| (a, s))).collect();
    let runs: Vec<TrainRun> = jobs
        .par_iter()
        .map(|&(arm, seed)| {
            let cfg = TrainerConfig {
                use_adjustment: arm == Arm::Grpovi,
                ..base.clone()
            };
            train(&world.with_rng_seed(seed), &cfg)
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for (&(arm, seed), run) in jobs.iter().zip(&runs) {
        for (i, rec) in run.records.iter().enumerate() {
            let p = rec.reward_variance.len() as f64;
            rows.push(CheckpointRow {
                arm,
                seed,
                checkpoint: i + 1,
                step: rec.step,
                mean_expected_reward: rec.mean_expected_reward,
                mean_reward_variance: rec.reward_variance.iter().sum::<f64>() / p,
                kl_to_reference: rec.kl_to_reference,
                wall_clock_s: rec.wall_clock_s,
            });
        }
    }

    let summaries = arms
        .iter()
        .map(|&arm| {
            let arm_runs: Vec<&TrainRun> = jobs
                .iter()
                .zip(&runs)
                .filter(|(j, _)| j.0 == arm)
                .map(|(_, r)| r)
                .collect();
            let finals: Vec<f64> = arm_runs
                .iter()
                .filter_map(|r| r.records.last().map(|rec| rec.mean_expected_reward))
                .collect();
            let n = finals.len().max(1) as f64;
            let final_mean = finals.iter().sum::<f64>() / n;
            let final_std = (finals.iter().map(|f| (f - final_mean).powi(2)).sum::<f64>() / n).sqrt();
            let mean_steps_to_threshold = arm_runs
                .iter()
                .map(|r| steps_to_threshold(&r.reward_curve, threshold) as f64)
                .sum::<f64>()
                / arm_runs.len().max(1) as f64;
            ArmSummary {
                arm,
                final_mean,
                final_std,
                mean_steps_to_threshold,
            }
        })
        .collect();

    Ok(Simulation {
        rows,
        summaries,
        threshold,
    })
}

pub fn write_csv<W: Write>(rows: &[CheckpointRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
