//! Input validation, probability normalization and the descending sort.

use alloc::string::String;
use alloc::vec::Vec;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::sum;

/// Where a group's response probabilities come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbSpec {
    /// Every response gets `1/n`.
    Uniform,
    /// Positive linear-space weights; need not sum to one.
    Probabilities(Vec<f64>),
    /// Log-space weights, normalized with a max shift so that widely spread
    /// sequence log-likelihoods do not underflow.
    LogProbabilities(Vec<f64>),
}

/// One prompt's responses as supplied by the caller, in original order.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardGroup {
    pub group_id: String,
    pub rewards: Vec<f64>,
    pub prob_spec: ProbSpec,
    pub lower: f64,
    pub upper: f64,
}

impl RewardGroup {
    pub fn new(group_id: impl Into<String>, rewards: Vec<f64>, lower: f64, upper: f64) -> Self {
        Self {
            group_id: group_id.into(),
            rewards,
            prob_spec: ProbSpec::Uniform,
            lower,
            upper,
        }
    }

    pub fn with_probabilities(mut self, probs: Vec<f64>) -> Self {
        self.prob_spec = ProbSpec::Probabilities(probs);
        self
    }

    pub fn with_log_probabilities(mut self, logprobs: Vec<f64>) -> Self {
        self.prob_spec = ProbSpec::LogProbabilities(logprobs);
        self
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// A validated group sorted by non-increasing reward.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGroup {
    pub sorted_rewards: Vec<f64>,
    /// Strictly positive, sums to one.
    pub sorted_probs: Vec<f64>,
    /// `perm[i]` is the original index of sorted entry `i`.
    pub perm: Vec<usize>,
    /// Probability-weighted mean reward, clamped into `[lower, upper]`.
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl NormalizedGroup {
    pub fn len(&self) -> usize {
        self.sorted_rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_rewards.is_empty()
    }

    /// Objective value of the unadjusted rewards, `sum_i p_i r_i^2`.
    pub fn original_objective(&self) -> f64 {
        sum::sum(
            self.sorted_probs
                .iter()
                .zip(&self.sorted_rewards)
                .map(|(p, r)| p * r * r),
        )
    }

    /// Collapses runs of equal rewards into single pseudo-responses carrying
    /// the summed probability. Returns the merged group and, for each sorted
    /// index of `self`, the index of the pseudo-response it belongs to.
    pub fn merge_ties(&self) -> (NormalizedGroup, Vec<usize>) {
        let n = self.len();
        let mut rewards = Vec::with_capacity(n);
        let mut probs: Vec<f64> = Vec::with_capacity(n);
        let mut perm = Vec::with_capacity(n);
        let mut membership = Vec::with_capacity(n);
        for i in 0..n {
            let r = self.sorted_rewards[i];
            if rewards.last() == Some(&r) {
                *probs.last_mut().unwrap() += self.sorted_probs[i];
            } else {
                rewards.push(r);
                probs.push(self.sorted_probs[i]);
                perm.push(self.perm[i]);
            }
            membership.push(rewards.len() - 1);
        }
        let merged = NormalizedGroup {
            sorted_rewards: rewards,
            sorted_probs: probs,
            perm,
            mean: self.mean,
            lower: self.lower,
            upper: self.upper,
        };
        (merged, membership)
    }
}

fn check_finite(values: &[f64], field: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::non_finite(field))
    }
}

/// Softmax of log weights with a max shift. Entries that still underflow are
/// floored at the smallest normal float so every probability stays positive.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&x| libm::exp(x - max)).collect();
    let total = sum::sum(out.iter().copied());
    for p in &mut out {
        *p = (*p / total).max(f64::MIN_POSITIVE);
    }
    out
}

fn linear_normalize(probs: &[f64]) -> Result<Vec<f64>> {
    if let Some((index, &value)) = probs.iter().enumerate().find(|(_, &p)| p <= 0.0) {
        return Err(Error::NonPositiveProbability { index, value });
    }
    let total = sum::sum(probs.iter().copied());
    Ok(probs.iter().map(|p| p / total).collect())
}

/// Validates a group, normalizes its probabilities and sorts it by
/// non-increasing reward. Ties keep their original relative order.
pub fn normalize(group: &RewardGroup, cfg: &SolverConfig) -> Result<NormalizedGroup> {
    let n = group.rewards.len();
    if n == 0 {
        return Err(Error::EmptyGroup);
    }
    let (lower, upper) = (group.lower, group.upper);
    if !lower.is_finite() {
        return Err(Error::non_finite("lower bound"));
    }
    if !upper.is_finite() {
        return Err(Error::non_finite("upper bound"));
    }
    if lower >= upper {
        return Err(Error::DegenerateBounds { lower, upper });
    }
    check_finite(&group.rewards, "rewards")?;

    let probs = match &group.prob_spec {
        ProbSpec::Uniform => alloc::vec![1.0 / n as f64; n],
        ProbSpec::Probabilities(p) => {
            if p.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: p.len(),
                });
            }
            check_finite(p, "probabilities")?;
            linear_normalize(p)?
        }
        ProbSpec::LogProbabilities(lp) => {
            if lp.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: lp.len(),
                });
            }
            check_finite(lp, "log-probabilities")?;
            softmax(lp)
        }
    };

    let mut rewards = Vec::with_capacity(n);
    for (index, &r) in group.rewards.iter().enumerate() {
        let outside = r < lower - cfg.feas_tol || r > upper + cfg.feas_tol;
        if outside && !cfg.clip_rewards {
            return Err(Error::RewardOutOfBounds {
                index,
                value: r,
                lower,
                upper,
            });
        }
        rewards.push(r.clamp(lower, upper));
    }

    let mut perm: Vec<usize> = (0..n).collect();
    // stable: equal rewards keep ascending original index
    perm.sort_by(|&a, &b| rewards[b].total_cmp(&rewards[a]));
    let sorted_rewards: Vec<f64> = perm.iter().map(|&i| rewards[i]).collect();
    let sorted_probs: Vec<f64> = perm.iter().map(|&i| probs[i]).collect();
    let mean = sum::dot(&sorted_probs, &sorted_rewards).clamp(lower, upper);

    Ok(NormalizedGroup {
        sorted_rewards,
        sorted_probs,
        perm,
        mean,
        lower,
        upper,
    })
}

/// Restores sorted-order values to the original response order.
pub fn unsort(values_sorted: &[f64], perm: &[usize]) -> Result<Vec<f64>> {
    if values_sorted.len() != perm.len() {
        return Err(Error::LengthMismatch {
            expected: perm.len(),
            actual: values_sorted.len(),
        });
    }
    let mut out = alloc::vec![0.0; perm.len()];
    for (&v, &orig) in values_sorted.iter().zip(perm) {
        out[orig] = v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn uniform_sort_and_mean() {
        let g = RewardGroup::new("a", vec![0.3, 0.9, 0.6], 0.0, 1.0);
        let ng = normalize(&g, &cfg()).unwrap();
        assert_eq!(ng.sorted_rewards, [0.9, 0.6, 0.3]);
        assert_eq!(ng.perm, [1, 2, 0]);
        assert!((ng.mean - 0.6).abs() < 1e-15);
        assert!(ng.sorted_probs.iter().all(|&p| p == 1.0 / 3.0));
    }

    #[test]
    fn equal_log_probabilities_are_uniform() {
        let g = RewardGroup::new("b", vec![0.5, 0.4, 0.3], 0.0, 1.0).with_log_probabilities(vec![-1.0, -1.0, -1.0]);
        let ng = normalize(&g, &cfg()).unwrap();
        for p in ng.sorted_probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn very_negative_log_probabilities_do_not_underflow() {
        // softmax(0, -1, -2) evaluated at 40 digits
        let expected = [
            0.665_240_955_774_821_89,
            0.244_728_471_054_797_65,
            0.090_030_573_170_380_458,
        ];
        let g = RewardGroup::new("c", vec![0.9, 0.5, 0.1], 0.0, 1.0)
            .with_log_probabilities(vec![-1000.0, -1001.0, -1002.0]);
        let ng = normalize(&g, &cfg()).unwrap();
        for (p, e) in ng.sorted_probs.iter().zip(expected) {
            assert!(p.is_finite() && *p > 0.0);
            assert!((p - e).abs() <= 1e-12 * e, "{p} vs {e}");
        }
    }

    #[test]
    fn extreme_spread_keeps_probabilities_positive() {
        let g = RewardGroup::new("d", vec![0.9, 0.1], 0.0, 1.0).with_log_probabilities(vec![0.0, -5000.0]);
        let ng = normalize(&g, &cfg()).unwrap();
        assert!(ng.sorted_probs.iter().all(|&p| p > 0.0));
        assert!((ng.sorted_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_and_linear_agree() {
        let probs = vec![0.1, 0.45, 0.05, 0.4];
        let logs: Vec<f64> = probs.iter().map(|p: &f64| p.ln() - 3.0).collect();
        let rewards = vec![0.2, 0.8, 0.4, 0.6];
        let a = normalize(
            &RewardGroup::new("e", rewards.clone(), 0.0, 1.0).with_probabilities(probs),
            &cfg(),
        )
        .unwrap();
        let b = normalize(
            &RewardGroup::new("e", rewards, 0.0, 1.0).with_log_probabilities(logs),
            &cfg(),
        )
        .unwrap();
        for (x, y) in a.sorted_probs.iter().zip(&b.sorted_probs) {
            assert!((x - y).abs() <= 1e-12 * x);
        }
    }

    #[test]
    fn error_paths() {
        let c = cfg();
        let empty = RewardGroup::new("x", vec![], 0.0, 1.0);
        assert_eq!(normalize(&empty, &c).unwrap_err(), Error::EmptyGroup);

        let oob = RewardGroup::new("x", vec![2.0], 0.0, 1.0);
        assert_eq!(normalize(&oob, &c).unwrap_err().name(), "RewardOutOfBounds");

        let zero_p = RewardGroup::new("x", vec![0.5, 0.5], 0.0, 1.0).with_probabilities(vec![0.5, 0.0]);
        assert_eq!(
            normalize(&zero_p, &c).unwrap_err(),
            Error::NonPositiveProbability { index: 1, value: 0.0 }
        );

        let degenerate = RewardGroup::new("x", vec![0.5], 1.0, 1.0);
        assert_eq!(normalize(&degenerate, &c).unwrap_err().name(), "DegenerateBounds");

        let nan = RewardGroup::new("x", vec![f64::NAN], 0.0, 1.0);
        assert_eq!(normalize(&nan, &c).unwrap_err().name(), "NonFiniteInput");
        let inf_p = RewardGroup::new("x", vec![0.5], 0.0, 1.0).with_probabilities(vec![f64::INFINITY]);
        assert_eq!(normalize(&inf_p, &c).unwrap_err().name(), "NonFiniteInput");
        let inf_bound = RewardGroup::new("x", vec![0.5], 0.0, f64::INFINITY);
        assert_eq!(normalize(&inf_bound, &c).unwrap_err().name(), "NonFiniteInput");

        let short = RewardGroup::new("x", vec![0.5, 0.2], 0.0, 1.0).with_probabilities(vec![1.0]);
        assert_eq!(normalize(&short, &c).unwrap_err().name(), "LengthMismatch");
    }

    #[test]
    fn clip_flag_clamps() {
        let c = SolverConfig {
            clip_rewards: true,
            ..cfg()
        };
        let g = RewardGroup::new("x", vec![2.0, -1.0, 0.5], 0.0, 1.0);
        let ng = normalize(&g, &c).unwrap();
        assert_eq!(ng.sorted_rewards, [1.0, 0.5, 0.0]);
    }

    #[test]
    fn within_tolerance_is_accepted_and_clamped() {
        let g = RewardGroup::new("x", vec![1.0 + 1e-13, 0.0], 0.0, 1.0);
        let ng = normalize(&g, &cfg()).unwrap();
        assert_eq!(ng.sorted_rewards[0], 1.0);
    }

    #[test]
    fn ties_keep_original_order() {
        let g = RewardGroup::new("x", vec![0.5, 0.7, 0.5, 0.7], 0.0, 1.0);
        let ng = normalize(&g, &cfg()).unwrap();
        assert_eq!(ng.perm, [1, 3, 0, 2]);
    }

    #[test]
    fn unsort_inverts_perm() {
        assert_eq!(unsort(&[1.0, 2.0, 3.0], &[1, 2, 0]).unwrap(), [3.0, 1.0, 2.0]);
        assert_eq!(unsort(&[4.0], &[0]).unwrap(), [4.0]);
        assert_eq!(unsort(&[1.0], &[0, 1]).unwrap_err().name(), "LengthMismatch");
    }

    #[test]
    fn merge_ties_sums_probability() {
        let g = RewardGroup::new("x", vec![0.5, 0.9, 0.5], 0.0, 1.0).with_probabilities(vec![0.2, 0.5, 0.3]);
        let ng = normalize(&g, &cfg()).unwrap();
        let (merged, membership) = ng.merge_ties();
        assert_eq!(merged.sorted_rewards, [0.9, 0.5]);
        assert!((merged.sorted_probs[1] - 0.5).abs() < 1e-15);
        assert_eq!(membership, [0, 1, 1]);
    }
}
