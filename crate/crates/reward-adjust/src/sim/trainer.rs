//! GRPO / GRPOVI training of a tabular policy with exact softmax gradients.

use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reward_adjust_core::{adjust_group, group_advantages, RewardGroup, SolverConfig, TiePolicy, DEFAULT_EPS_STD};

use super::{exact_reward_moments, SimWorld, TabularPolicy};
use crate::error::SimError;

pub const NUM_CHECKPOINTS: usize = 8;

/// Which policy supplies `p_i` for the reward adjustment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbabilitySource {
    #[default]
    InitialPolicy,
    CurrentPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub group_size: usize,
    pub batch_prompts: usize,
    pub learning_rate: f64,
    pub kl_coeff: f64,
    pub clip_eps: f64,
    pub steps: usize,
    /// GRPOVI when set, plain GRPO otherwise.
    pub use_adjustment: bool,
    pub adjustment_probability_source: ProbabilitySource,
    pub tie_policy: TiePolicy,
    /// Gradient steps taken on each sampled batch.
    pub epochs_per_batch: usize,
    pub eps_std: f64,
    pub advantage_scaling: AdvantageScaling,
}

/// How sampled rewards become advantages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdvantageScaling {
    /// `(r_i - mean) / std` within the group.
    #[default]
    GroupStd,
    /// `r_i - mean` only; for ablations.
    MeanOnly,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            batch_prompts: 4,
            learning_rate: 0.5,
            kl_coeff: 0.01,
            clip_eps: 0.2,
            steps: 200,
            use_adjustment: false,
            adjustment_probability_source: ProbabilitySource::InitialPolicy,
            tie_policy: TiePolicy::Merge,
            epochs_per_batch: 1,
            eps_std: DEFAULT_EPS_STD,
            advantage_scaling: AdvantageScaling::GroupStd,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::InvalidConfig(msg.into()));
        if self.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if self.batch_prompts == 0 {
            return bad("batch_prompts must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.kl_coeff >= 0.0 && self.kl_coeff.is_finite()) {
            return bad("kl_coeff must be finite and non-negative");
        }
        if !(self.clip_eps >= 0.0 && self.clip_eps.is_finite()) {
            return bad("clip_eps must be finite and non-negative");
        }
        if self.epochs_per_batch == 0 {
            return bad("epochs_per_batch must be at least 1");
        }
        Ok(())
    }
}

/// Exact state of the policy at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub step: usize,
    pub expected_reward: Vec<f64>,
    pub reward_variance: Vec<f64>,
    pub mean_expected_reward: f64,
    /// Mean over prompts of `KL(pi || pi_ref)`.
    pub kl_to_reference: f64,
    /// Seconds since training started. Not deterministic.
    pub wall_clock_s: f64,
}

impl TrainRecord {
    /// Equality on every deterministic field, bit for bit.
    pub fn same_state(&self, other: &Self) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.step == other.step
            && bits(&self.expected_reward) == bits(&other.expected_reward)
            && bits(&self.reward_variance) == bits(&other.reward_variance)
            && self.mean_expected_reward.to_bits() == other.mean_expected_reward.to_bits()
            && self.kl_to_reference.to_bits() == other.kl_to_reference.to_bits()
    }
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub records: Vec<TrainRecord>,
    /// Mean expected reward after each step, starting with the initial policy.
    pub reward_curve: Vec<f64>,
    pub final_policy: TabularPolicy,
}

/// One prompt's sampled responses with their fixed advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    pub prompt: usize,
    pub responses: Vec<usize>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    /// `log pi_old(y_i | x)` of the sampling policy.
    pub old_log_probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub groups: Vec<GroupSample>,
}

fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Samples a batch from `policy` and computes its (optionally adjusted)
/// group advantages.
pub fn sample_batch(
    policy: &TabularPolicy,
    reference: &TabularPolicy,
    world: &SimWorld,
    cfg: &TrainerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Batch, SimError> {
    let solver_cfg = SolverConfig::default().with_tie_policy(cfg.tie_policy);
    let take = cfg.batch_prompts.min(world.num_prompts);
    let mut prompts = index::sample(rng, world.num_prompts, take).into_vec();
    prompts.sort_unstable();

    let mut groups = Vec::with_capacity(take);
    for prompt in prompts {
        let probs = policy.probs(prompt);
        let log_probs = policy.log_probs(prompt);
        let responses: Vec<usize> = (0..cfg.group_size).map(|_| sample_categorical(&probs, rng)).collect();
        let mut rewards: Vec<f64> = responses.iter().map(|&y| world.reward(prompt, y)).collect();
        if cfg.use_adjustment {
            let source = match cfg.adjustment_probability_source {
                ProbabilitySource::InitialPolicy => reference.log_probs(prompt),
                ProbabilitySource::CurrentPolicy => log_probs.clone(),
            };
            let group = RewardGroup::new(format!("prompt-{prompt}"), rewards, world.lower, world.upper)
                .with_log_probabilities(responses.iter().map(|&y| source[y]).collect());
            rewards = adjust_group(&group, &solver_cfg)?.adjusted_rewards;
        }
        let adv = group_advantages(&rewards, cfg.eps_std)?;
        let advantages = match cfg.advantage_scaling {
            AdvantageScaling::GroupStd => adv.advantages,
            AdvantageScaling::MeanOnly => rewards.iter().map(|r| r - adv.mean_used).collect(),
        };
        groups.push(GroupSample {
            prompt,
            old_log_probs: responses.iter().map(|&y| log_probs[y]).collect(),
            responses,
            rewards,
            advantages,
        });
    }
    Ok(Batch { groups })
}

fn kl_row(log_p: &[f64], log_ref: &[f64]) -> f64 {
    log_p.iter().zip(log_ref).map(|(lp, lr)| lp.exp() * (lp - lr)).sum()
}

fn clip(ratio: f64, eps: f64) -> f64 {
    ratio.clamp(1.0 - eps, 1.0 + eps)
}

/// Batch surrogate
/// `mean_x [ mean_i min(rho_i A_i, clip(rho_i) A_i) - lambda KL(pi(.|x) || pi_ref(.|x)) ]`
/// evaluated at `logits`.
pub fn surrogate_objective(
    logits: &TabularPolicy,
    reference: &TabularPolicy,
    batch: &Batch,
    cfg: &TrainerConfig,
) -> f64 {
    let mut total = 0.0;
    for g in &batch.groups {
        let log_p = logits.log_probs(g.prompt);
        let n = g.responses.len() as f64;
        let mut surrogate = 0.0;
        for ((&y, &a), &old) in g.responses.iter().zip(&g.advantages).zip(&g.old_log_probs) {
            let ratio = (log_p[y] - old).exp();
            surrogate += (ratio * a).min(clip(ratio, cfg.clip_eps) * a);
        }
        total += surrogate / n - cfg.kl_coeff * kl_row(&log_p, &reference.log_probs(g.prompt));
    }
    total / batch.groups.len().max(1) as f64
}

/// Analytic gradient of [`surrogate_objective`] with respect to the logits.
pub fn surrogate_gradient(
    logits: &TabularPolicy,
    reference: &TabularPolicy,
    batch: &Batch,
    cfg: &TrainerConfig,
) -> Vec<f64> {
    let y_count = logits.num_responses;
    let mut grad = vec![0.0; logits.logits.len()];
    let scale = 1.0 / batch.groups.len().max(1) as f64;
    for g in &batch.groups {
        let log_p = logits.log_probs(g.prompt);
        let probs: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
        let row = &mut grad[g.prompt * y_count..(g.prompt + 1) * y_count];
        let n = g.responses.len() as f64;
        for ((&y, &a), &old) in g.responses.iter().zip(&g.advantages).zip(&g.old_log_probs) {
            let ratio = (log_p[y] - old).exp();
            // the clipped branch is constant in theta
            if ratio * a <= clip(ratio, cfg.clip_eps) * a {
                let w = scale * a * ratio / n;
                for (j, gj) in row.iter_mut().enumerate() {
                    *gj -= w * probs[j];
                }
                row[y] += w;
            }
        }
        if cfg.kl_coeff != 0.0 {
            let log_ref = reference.log_probs(g.prompt);
            let kl = kl_row(&log_p, &log_ref);
            for j in 0..y_count {
                row[j] -= scale * cfg.kl_coeff * probs[j] * (log_p[j] - log_ref[j] - kl);
            }
        }
    }
    grad
}

fn checkpoint_steps(steps: usize) -> [usize; NUM_CHECKPOINTS] {
    let mut out = [0; NUM_CHECKPOINTS];
    for (j, s) in out.iter_mut().enumerate() {
        *s = ((j + 1) * steps).div_ceil(NUM_CHECKPOINTS);
    }
    out
}

fn record(
    step: usize,
    policy: &TabularPolicy,
    reference: &TabularPolicy,
    world: &SimWorld,
    start: Instant,
) -> Result<TrainRecord, SimError> {
    let moments = exact_reward_moments(policy, world, None)?;
    let prompts = world.num_prompts as f64;
    let kl = (0..world.num_prompts)
        .map(|x| kl_row(&policy.log_probs(x), &reference.log_probs(x)))
        .sum::<f64>()
        / prompts;
    Ok(TrainRecord {
        step,
        mean_expected_reward: moments.means.iter().sum::<f64>() / prompts,
        expected_reward: moments.means,
        reward_variance: moments.variances,
        kl_to_reference: kl,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// Trains from the world's initial policy, which is also the KL reference.
/// Records [`NUM_CHECKPOINTS`] evenly spaced checkpoints; deterministic given
/// `world.rng_seed`.
pub fn train(world: &SimWorld, cfg: &TrainerConfig) -> Result<TrainRun, SimError> {
    cfg.validate()?;
    let start = Instant::now();
    let reference = world.initial_policy();
    let mut policy = reference.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(world.rng_seed);
    let checkpoints = checkpoint_steps(cfg.steps);

    let mut records = Vec::with_capacity(NUM_CHECKPOINTS);
    let mut curve = Vec::with_capacity(cfg.steps + 1);
    let initial = record(0, &policy, &reference, world, start)?;
    curve.push(initial.mean_expected_reward);
    let mut next = 0;
    while next < NUM_CHECKPOINTS && checkpoints[next] == 0 {
        records.push(initial.clone());
        next += 1;
    }

    for step in 1..=cfg.steps {
        let batch = sample_batch(&policy, &reference, world, cfg, &mut rng)?;
        for _ in 0..cfg.epochs_per_batch {
            let grad = surrogate_gradient(&policy, &reference, &batch, cfg);
            for (l, g) in policy.logits.iter_mut().zip(&grad) {
                *l += cfg.learning_rate * g;
            }
        }
        if let Some(i) = policy.logits.iter().position(|l| !l.is_finite()) {
            return Err(SimError::NonFiniteLogits {
                step,
                prompt: i / world.responses_per_prompt,
            });
        }
        let moments = exact_reward_moments(&policy, world, None)?;
        curve.push(moments.means.iter().sum::<f64>() / world.num_prompts as f64);
        if next < NUM_CHECKPOINTS && checkpoints[next] == step {
            let rec = record(step, &policy, &reference, world, start)?;
            while next < NUM_CHECKPOINTS && checkpoints[next] == step {
                records.push(rec.clone());
                next += 1;
            }
        }
    }

    Ok(TrainRun {
        records,
        reward_curve: curve,
        final_policy: policy,
    })
}

/// Compares the analytic surrogate gradient with central finite differences
/// (step `1e-5`) on a batch sampled from `policy`, evaluated at slightly
/// perturbed logits so that probability ratios differ from one. Returns the
/// largest per-coordinate relative error, `|a - f| / max(|a|, |f|, 1e-6)`.
pub fn gradient_check(policy: &TabularPolicy, world: &SimWorld, cfg: &TrainerConfig) -> Result<f64, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(world.rng_seed);
    let reference = world.initial_policy();
    policy.check_dims(world)?;
    let batch = sample_batch(policy, &reference, world, cfg, &mut rng)?;

    let mut at = policy.clone();
    for l in &mut at.logits {
        *l += 0.05 * (2.0 * rng.random::<f64>() - 1.0);
    }
    let analytic = surrogate_gradient(&at, &reference, &batch, cfg);

    const H: f64 = 1e-5;
    let mut worst: f64 = 0.0;
    for (j, &a) in analytic.iter().enumerate() {
        let orig = at.logits[j];
        at.logits[j] = orig + H;
        let up = surrogate_objective(&at, &reference, &batch, cfg);
        at.logits[j] = orig - H;
        let down = surrogate_objective(&at, &reference, &batch, cfg);
        at.logits[j] = orig;
        let fd = (up - down) / (2.0 * H);
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}
