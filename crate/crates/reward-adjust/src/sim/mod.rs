//! Desk-scale verification harness: a finite prompt/response space with a
//! tabular softmax policy, where every expectation and variance is an exact
//! finite sum.

mod compare;
mod trainer;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use reward_adjust_core::{adjust_group, RewardGroup, SolverConfig};

use crate::error::SimError;

pub use compare::{compare_grpo_grpovi, steps_to_threshold, CheckpointSummary, ComparisonReport};
pub use trainer::{
    gradient_check, sample_batch, surrogate_gradient, surrogate_objective, train, AdvantageScaling, Batch, GroupSample,
    ProbabilitySource, TrainRecord, TrainRun, TrainerConfig, NUM_CHECKPOINTS,
};

/// Adjusted rewards for a subset of `(prompt, response)` cells.
pub type RewardOverride = BTreeMap<(usize, usize), f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct SimWorld {
    pub num_prompts: usize,
    pub responses_per_prompt: usize,
    /// Row-major `num_prompts x responses_per_prompt`.
    pub reward_table: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub rng_seed: u64,
    /// Logits of the initial (and reference) policy, same layout as the table.
    pub initial_logits: Vec<f64>,
}

/// Parameters for [`SimWorld::random`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldSpec {
    pub num_prompts: usize,
    pub responses_per_prompt: usize,
    pub lower: f64,
    pub upper: f64,
    /// Standard deviation of the initial logits; 0 gives a uniform policy.
    pub logit_std: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            num_prompts: 8,
            responses_per_prompt: 16,
            lower: 0.0,
            upper: 1.0,
            logit_std: 1.0,
        }
    }
}

impl SimWorld {
    pub fn new(
        num_prompts: usize,
        responses_per_prompt: usize,
        reward_table: Vec<f64>,
        lower: f64,
        upper: f64,
        rng_seed: u64,
        initial_logits: Vec<f64>,
    ) -> Result<Self, SimError> {
        if num_prompts == 0 || responses_per_prompt == 0 {
            return Err(SimError::InvalidConfig("world dimensions must be at least 1".into()));
        }
        if !lower.is_finite() || !upper.is_finite() || lower >= upper {
            return Err(SimError::InvalidConfig(format!(
                "bounds [{lower}, {upper}] are degenerate"
            )));
        }
        let cells = num_prompts * responses_per_prompt;
        if reward_table.len() != cells || initial_logits.len() != cells {
            return Err(SimError::DimensionMismatch(format!(
                "expected {cells} cells, got {} rewards and {} logits",
                reward_table.len(),
                initial_logits.len()
            )));
        }
        if let Some(r) = reward_table.iter().find(|r| !(**r >= lower && **r <= upper)) {
            return Err(SimError::InvalidConfig(format!(
                "reward {r} outside [{lower}, {upper}]"
            )));
        }
        if initial_logits.iter().any(|l| !l.is_finite()) {
            return Err(SimError::InvalidConfig("initial logits must be finite".into()));
        }
        Ok(Self {
            num_prompts,
            responses_per_prompt,
            reward_table,
            lower,
            upper,
            rng_seed,
            initial_logits,
        })
    }

    /// Rewards i.i.d. uniform on `[lower, upper]`, logits i.i.d. normal.
    /// `world_seed` drives the table; `rng_seed` is stored for training.
    pub fn random(spec: WorldSpec, world_seed: u64, rng_seed: u64) -> Result<Self, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(world_seed);
        let cells = spec.num_prompts * spec.responses_per_prompt;
        let uniform =
            Uniform::new_inclusive(spec.lower, spec.upper).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        let reward_table: Vec<f64> = (0..cells).map(|_| uniform.sample(&mut rng)).collect();
        let initial_logits = if spec.logit_std > 0.0 {
            let normal = Normal::new(0.0, spec.logit_std).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
            (0..cells).map(|_| normal.sample(&mut rng)).collect()
        } else {
            vec![0.0; cells]
        };
        Self::new(
            spec.num_prompts,
            spec.responses_per_prompt,
            reward_table,
            spec.lower,
            spec.upper,
            rng_seed,
            initial_logits,
        )
    }

    pub fn with_rng_seed(&self, rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..self.clone()
        }
    }

    pub fn rewards(&self, prompt: usize) -> &[f64] {
        let y = self.responses_per_prompt;
        &self.reward_table[prompt * y..(prompt + 1) * y]
    }

    pub fn reward(&self, prompt: usize, response: usize) -> f64 {
        self.reward_table[prompt * self.responses_per_prompt + response]
    }

    pub fn initial_policy(&self) -> TabularPolicy {
        TabularPolicy {
            num_prompts: self.num_prompts,
            num_responses: self.responses_per_prompt,
            logits: self.initial_logits.clone(),
        }
    }
}

/// Single-step categorical policy `pi(y | x) = softmax(logits[x, :])[y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    pub num_prompts: usize,
    pub num_responses: usize,
    pub logits: Vec<f64>,
}

impl TabularPolicy {
    pub fn uniform(num_prompts: usize, num_responses: usize) -> Self {
        Self {
            num_prompts,
            num_responses,
            logits: vec![0.0; num_prompts * num_responses],
        }
    }

    pub fn logits_row(&self, prompt: usize) -> &[f64] {
        let y = self.num_responses;
        &self.logits[prompt * y..(prompt + 1) * y]
    }

    /// Log-softmax of one row with a max shift.
    pub fn log_probs(&self, prompt: usize) -> Vec<f64> {
        log_softmax(self.logits_row(prompt))
    }

    pub fn probs(&self, prompt: usize) -> Vec<f64> {
        let row = self.logits_row(prompt);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = row.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = out.iter().sum();
        for p in &mut out {
            *p /= total;
        }
        out
    }

    fn check_dims(&self, world: &SimWorld) -> Result<(), SimError> {
        if self.num_prompts != world.num_prompts
            || self.num_responses != world.responses_per_prompt
            || self.logits.len() != self.num_prompts * self.num_responses
        {
            return Err(SimError::DimensionMismatch(format!(
                "policy is {}x{}, world is {}x{}",
                self.num_prompts, self.num_responses, world.num_prompts, world.responses_per_prompt
            )));
        }
        Ok(())
    }
}

pub(crate) fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    row.iter().map(|l| l - lse).collect()
}

/// Exact per-prompt reward mean and variance under `policy`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Exact moments over the full response space. Cells present in
/// `reward_override` use the overriding reward instead of the table's.
pub fn exact_reward_moments(
    policy: &TabularPolicy,
    world: &SimWorld,
    reward_override: Option<&RewardOverride>,
) -> Result<Moments, SimError> {
    policy.check_dims(world)?;
    if let Some(ov) = reward_override {
        if let Some(&(x, y)) = ov
            .keys()
            .find(|&&(x, y)| x >= world.num_prompts || y >= world.responses_per_prompt)
        {
            return Err(SimError::DimensionMismatch(format!(
                "override cell ({x}, {y}) is outside the world"
            )));
        }
    }
    let mut means = Vec::with_capacity(world.num_prompts);
    let mut variances = Vec::with_capacity(world.num_prompts);
    for x in 0..world.num_prompts {
        let probs = policy.probs(x);
        let reward = |y: usize| {
            reward_override
                .and_then(|ov| ov.get(&(x, y)).copied())
                .unwrap_or_else(|| world.reward(x, y))
        };
        let mean: f64 = probs.iter().enumerate().map(|(y, p)| p * reward(y)).sum();
        let var: f64 = probs
            .iter()
            .enumerate()
            .map(|(y, p)| {
                let d = reward(y) - mean;
                p * d * d
            })
            .sum();
        means.push(mean);
        variances.push(var);
    }
    Ok(Moments { means, variances })
}

/// Mean and variance of one prompt before and after overriding a group's
/// rewards with their adjusted values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceGain {
    pub mean_before: f64,
    pub mean_after: f64,
    pub var_before: f64,
    pub var_after: f64,
}

/// Adjusts the rewards of the distinct `responses` of `prompt` using
/// probabilities from `policy`, then evaluates the exact moments of `policy`
/// with and without the override.
pub fn variance_gain(
    policy: &TabularPolicy,
    world: &SimWorld,
    prompt: usize,
    responses: &[usize],
    cfg: &SolverConfig,
) -> Result<VarianceGain, SimError> {
    policy.check_dims(world)?;
    let log_probs = policy.log_probs(prompt);
    let group = RewardGroup::new(
        format!("prompt-{prompt}"),
        responses.iter().map(|&y| world.reward(prompt, y)).collect(),
        world.lower,
        world.upper,
    )
    .with_log_probabilities(responses.iter().map(|&y| log_probs[y]).collect());
    let adjusted = adjust_group(&group, cfg)?;
    let overrides: RewardOverride = responses
        .iter()
        .zip(&adjusted.adjusted_rewards)
        .map(|(&y, &z)| ((prompt, y), z))
        .collect();
    let before = exact_reward_moments(policy, world, None)?;
    let after = exact_reward_moments(policy, world, Some(&overrides))?;
    Ok(VarianceGain {
        mean_before: before.means[prompt],
        mean_after: after.means[prompt],
        var_before: before.variances[prompt],
        var_after: after.variances[prompt],
    })
}
