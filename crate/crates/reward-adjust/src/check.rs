//! Invariant and cross-solver suites, plus re-validation of `adjust` output.

use std::io::BufRead;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use reward_adjust_core::{
    adjust_group, normalize, objective, solve_enumeration, solve_one_pass, solve_vertex_oracle, Algorithm, RewardGroup,
    SolverConfig, TiePolicy,
};

use crate::io::{adjust_line, AdjustInput, AdjustOutput};
use crate::sim::{variance_gain, SimWorld, TabularPolicy};

/// Mean preservation tolerance, relative to `max(1, |c|)`.
pub const MEAN_TOL: f64 = 1e-9;
/// Allowed objective decrease relative to the input rewards.
pub const IMPROVEMENT_TOL: f64 = 1e-12;
/// Solver agreement tolerance, relative to `max(1, f)`.
pub const AGREEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub name: String,
    pub cases: usize,
    /// First few failure descriptions; `failed` holds the full count.
    pub failures: Vec<String>,
    pub failed: usize,
    /// Largest relative disagreement seen, where the suite measures one.
    pub max_error: f64,
    pub elapsed_s: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }

    fn collect(name: &str, start: Instant, outcomes: Vec<Result<f64, String>>) -> Self {
        let mut report = CheckReport {
            name: name.to_owned(),
            cases: outcomes.len(),
            ..Default::default()
        };
        for o in outcomes {
            match o {
                Ok(e) => report.max_error = report.max_error.max(e),
                Err(msg) => {
                    report.failed += 1;
                    if report.failures.len() < 10 {
                        report.failures.push(msg);
                    }
                }
            }
        }
        report.elapsed_s = start.elapsed().as_secs_f64();
        report
    }
}

fn case_rng(seed: u64, case: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case as u64);
    rng
}

/// Probabilities i.i.d. uniform then normalized, rewards i.i.d. uniform on
/// `[0, 1]` in arbitrary order.
pub fn random_group<R: Rng>(rng: &mut R, n: usize) -> RewardGroup {
    let w: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    let rewards = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
    RewardGroup::new("random", rewards, 0.0, 1.0).with_probabilities(w.iter().map(|x| x / total).collect())
}

/// Random group with a mix of features: shifted bounds, repeated rewards,
/// rewards on the bounds, and linear, log or uniform probabilities.
pub fn random_mixed_group<R: Rng>(rng: &mut R, n: usize) -> RewardGroup {
    let lower = if rng.random_bool(0.5) {
        0.0
    } else {
        rng.random_range(-5.0..0.0)
    };
    let upper = lower
        + if rng.random_bool(0.5) {
            1.0
        } else {
            rng.random_range(0.1..10.0)
        };
    let grid = rng.random_range(2..6u32);
    let discrete = rng.random_bool(0.3);
    let rewards = (0..n)
        .map(|_| {
            let u: f64 = if discrete {
                f64::from(rng.random_range(0..=grid)) / f64::from(grid)
            } else {
                rng.random()
            };
            (lower + u * (upper - lower)).clamp(lower, upper)
        })
        .collect();
    let g = RewardGroup::new("mixed", rewards, lower, upper);
    match rng.random_range(0..3) {
        0 => g,
        1 => g.with_probabilities((0..n).map(|_| 1.0 - rng.random::<f64>()).collect()),
        _ => g.with_log_probabilities((0..n).map(|_| rng.random_range(-8.0..0.0)).collect()),
    }
}

/// Checks `adjusted` (in the group's original order) against every
/// feasibility invariant and returns its objective.
pub fn verify_adjusted(group: &RewardGroup, adjusted: &[f64], cfg: &SolverConfig) -> Result<f64, String> {
    let ng = normalize(group, cfg).map_err(|e| format!("{}: input no longer validates: {e}", group.group_id))?;
    if adjusted.len() != ng.len() {
        return Err(format!(
            "{}: {} adjusted values for {} rewards",
            group.group_id,
            adjusted.len(),
            ng.len()
        ));
    }
    let z: Vec<f64> = ng.perm.iter().map(|&i| adjusted[i]).collect();
    let id = &group.group_id;
    if let Some(v) = z
        .iter()
        .find(|v| !(**v >= ng.lower - cfg.feas_tol && **v <= ng.upper + cfg.feas_tol))
    {
        return Err(format!("{id}: value {v} outside [{}, {}]", ng.lower, ng.upper));
    }
    let mean = reward_adjust_core::sum::dot(&z, &ng.sorted_probs);
    if (mean - ng.mean).abs() > MEAN_TOL * ng.mean.abs().max(1.0) {
        return Err(format!("{id}: mean {mean} differs from {}", ng.mean));
    }
    if let Some(i) = (1..z.len()).find(|&i| z[i] > z[i - 1] + cfg.feas_tol) {
        return Err(format!("{id}: order broken at sorted position {i}"));
    }
    let f = objective(&z, &ng.sorted_probs).map_err(|e| e.to_string())?;
    let f_r = ng.original_objective();
    if f < f_r - IMPROVEMENT_TOL {
        return Err(format!("{id}: objective {f} below original {f_r}"));
    }
    let mut distinct = z.clone();
    distinct.dedup();
    if distinct.len() > 3 {
        return Err(format!("{id}: {} distinct values", distinct.len()));
    }
    Ok(f)
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// One-pass vs enumeration on `cases` random groups with sizes in `sizes`.
pub fn equivalence_suite(cases: usize, sizes: std::ops::RangeInclusive<usize>, seed: u64) -> CheckReport {
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let outcomes = (0..cases)
        .into_par_iter()
        .map(|case| {
            let mut rng = case_rng(seed, case);
            let n = rng.random_range(sizes.clone());
            let ng = normalize(&random_group(&mut rng, n), &cfg).map_err(|e| e.to_string())?;
            let fe = solve_enumeration(&ng, &cfg).map_err(|e| e.to_string())?.f_star;
            let (op, _) = solve_one_pass(&ng, &cfg).map_err(|e| e.to_string())?;
            let d = rel_diff(fe, op.f_star);
            if d > AGREEMENT_TOL {
                return Err(format!(
                    "case {case} (n={n}): enumeration {fe} vs one-pass {}",
                    op.f_star
                ));
            }
            Ok(d)
        })
        .collect();
    CheckReport::collect("solver equivalence", start, outcomes)
}

/// Enumeration vs the vertex oracle on `cases` random groups with `n <= max_n`.
pub fn oracle_suite(cases: usize, max_n: usize, seed: u64) -> CheckReport {
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let outcomes = (0..cases)
        .into_par_iter()
        .map(|case| {
            let mut rng = case_rng(seed, case);
            let n = rng.random_range(1..=max_n);
            let group = if case % 2 == 0 {
                random_group(&mut rng, n)
            } else {
                random_mixed_group(&mut rng, n)
            };
            let ng = normalize(&group, &cfg).map_err(|e| e.to_string())?;
            let fe = solve_enumeration(&ng, &cfg).map_err(|e| e.to_string())?.f_star;
            let fo = solve_vertex_oracle(&ng, &cfg).map_err(|e| e.to_string())?.f_star;
            let d = rel_diff(fe, fo);
            if d > AGREEMENT_TOL {
                return Err(format!("case {case} (n={n}): enumeration {fe} vs oracle {fo}"));
            }
            Ok(d)
        })
        .collect();
    CheckReport::collect("oracle cross-check", start, outcomes)
}

/// The oracle's cost grows combinatorially; beyond this it dominates the suite.
const FEASIBILITY_ORACLE_MAX_N: usize = 6;

/// Every algorithm and tie policy on mixed random groups; each output must
/// pass [`verify_adjusted`].
pub fn feasibility_suite(cases: usize, max_n: usize, seed: u64) -> CheckReport {
    let start = Instant::now();
    let outcomes = (0..cases)
        .into_par_iter()
        .map(|case| {
            let mut rng = case_rng(seed, case);
            let n = rng.random_range(1..=max_n);
            let group = random_mixed_group(&mut rng, n);
            let mut algorithms = vec![Algorithm::OnePass, Algorithm::Enumeration];
            if n <= FEASIBILITY_ORACLE_MAX_N {
                algorithms.push(Algorithm::Oracle);
            }
            for alg in algorithms {
                for tie in [TiePolicy::Free, TiePolicy::Merge] {
                    let cfg = SolverConfig::default().with_algorithm(alg).with_tie_policy(tie);
                    let res = adjust_group(&group, &cfg).map_err(|e| format!("case {case}: {e}"))?;
                    verify_adjusted(&group, &res.adjusted_rewards, &cfg)
                        .map_err(|e| format!("case {case} {alg:?}/{tie:?}: {e}"))?;
                }
            }
            Ok(0.0)
        })
        .collect();
    CheckReport::collect("feasibility", start, outcomes)
}

#[derive(Debug, Clone, Default)]
pub struct VarianceGainReport {
    pub check: CheckReport,
    /// Triples whose group rewards are not already a vertex of the feasible
    /// set, i.e. hold at least two distinct values strictly inside the bounds.
    pub non_degenerate: usize,
    /// Non-degenerate triples whose variance strictly increased.
    pub strict: usize,
    pub max_mean_diff: f64,
    pub min_var_diff: f64,
}

impl VarianceGainReport {
    pub fn strict_fraction(&self) -> f64 {
        if self.non_degenerate == 0 {
            1.0
        } else {
            self.strict as f64 / self.non_degenerate as f64
        }
    }
}

fn random_logits<R: Rng>(rng: &mut R, cells: usize) -> Vec<f64> {
    let std = rng.random_range(0.0..3.0);
    match Normal::new(0.0, std) {
        Ok(normal) if std > 0.0 => (0..cells).map(|_| normal.sample(rng)).collect(),
        _ => vec![0.0; cells],
    }
}

/// Draws `draws` responses from `probs` with replacement and keeps the
/// distinct ones in first-seen order.
fn sample_distinct<R: Rng>(rng: &mut R, probs: &[f64], draws: usize) -> Vec<usize> {
    let mut seen = vec![false; probs.len()];
    let mut out = Vec::new();
    for _ in 0..draws {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let y = probs
            .iter()
            .position(|p| {
                acc += p;
                u < acc
            })
            .unwrap_or(probs.len() - 1);
        if !seen[y] {
            seen[y] = true;
            out.push(y);
        }
    }
    out
}

/// Random (policy, reward table, group) triples on response spaces of at most
/// `max_y` responses. The group is adjusted with probabilities from the
/// evaluated policy; with `later_policy_groups` the evaluated policy is the
/// initial one and the group is sampled from an unrelated later policy.
pub fn variance_gain_suite(cases: usize, max_y: usize, later_policy_groups: bool, seed: u64) -> VarianceGainReport {
    let start = Instant::now();
    let cfg = SolverConfig::default().with_tie_policy(TiePolicy::Merge);
    let results: Vec<Result<(f64, f64, bool, bool), String>> = (0..cases)
        .into_par_iter()
        .map(|case| {
            let mut rng = case_rng(seed, case);
            let y = rng.random_range(2..=max_y);
            let prompts = rng.random_range(1..=3);
            let cells = prompts * y;
            let grid = rng.random_bool(0.2);
            let table = (0..cells)
                .map(|_| {
                    if grid {
                        f64::from(rng.random_range(0..=4u32)) / 4.0
                    } else {
                        rng.random_range(0.0..=1.0)
                    }
                })
                .collect();
            let world = SimWorld::new(prompts, y, table, 0.0, 1.0, 0, random_logits(&mut rng, cells))
                .map_err(|e| e.to_string())?;
            let policy = if later_policy_groups {
                world.initial_policy()
            } else {
                TabularPolicy {
                    num_prompts: prompts,
                    num_responses: y,
                    logits: random_logits(&mut rng, cells),
                }
            };
            let sampler = if later_policy_groups {
                TabularPolicy {
                    num_prompts: prompts,
                    num_responses: y,
                    logits: random_logits(&mut rng, cells),
                }
            } else {
                policy.clone()
            };
            let prompt = rng.random_range(0..prompts);
            let draws = rng.random_range(1..=16);
            let mut responses = sample_distinct(&mut rng, &sampler.probs(prompt), draws);
            if responses.len() < 2 && y >= 2 {
                // top up so most triples have a group worth adjusting
                responses = index::sample(&mut rng, y, 2).into_vec();
            }
            let gain =
                variance_gain(&policy, &world, prompt, &responses, &cfg).map_err(|e| format!("case {case}: {e}"))?;
            let mean_diff = (gain.mean_after - gain.mean_before).abs();
            let var_diff = gain.var_after - gain.var_before;
            let mut interior: Vec<f64> = responses
                .iter()
                .map(|&r| world.reward(prompt, r))
                .filter(|&r| r > world.lower && r < world.upper)
                .collect();
            interior.sort_by(f64::total_cmp);
            interior.dedup();
            let non_degenerate = interior.len() >= 2;
            if mean_diff > MEAN_TOL || var_diff < -IMPROVEMENT_TOL {
                return Err(format!(
                    "case {case}: mean diff {mean_diff:e}, variance diff {var_diff:e}"
                ));
            }
            Ok((mean_diff, var_diff, non_degenerate, var_diff > 0.0))
        })
        .collect();

    let mut report = VarianceGainReport {
        min_var_diff: f64::INFINITY,
        ..Default::default()
    };
    let mut outcomes = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok((md, vd, nd, strict)) => {
                report.max_mean_diff = report.max_mean_diff.max(md);
                report.min_var_diff = report.min_var_diff.min(vd);
                report.non_degenerate += usize::from(nd);
                report.strict += usize::from(nd && strict);
                outcomes.push(Ok(md));
            }
            Err(e) => outcomes.push(Err(e)),
        }
    }
    let name = if later_policy_groups {
        "variance gain (initial policy)"
    } else {
        "variance gain (same policy)"
    };
    report.check = CheckReport::collect(name, start, outcomes);
    report
}

/// Re-validates one `adjust` output record against its input line.
pub fn verify_record(input_line: &str, output: &AdjustOutput, cfg: &SolverConfig) -> Result<(), String> {
    let expected = adjust_line(input_line, cfg);
    if output.id != expected.id {
        return Err(format!("id {:?} does not match input id {:?}", output.id, expected.id));
    }
    let label = output.id.clone().unwrap_or_default();
    match (&output.error, &expected.error) {
        (Some(got), Some(want)) if got == want => return Ok(()),
        (Some(got), Some(want)) => return Err(format!("{label}: error {got:?}, expected {want:?}")),
        (Some(got), None) => return Err(format!("{label}: unexpected error {got:?}")),
        (None, Some(want)) => return Err(format!("{label}: input fails with {want:?} but output has none")),
        (None, None) => {}
    }
    let input: AdjustInput = serde_json::from_str(input_line).map_err(|e| e.to_string())?;
    let group = input.into_group()?;
    let f = verify_adjusted(&group, &output.adjusted, cfg)?;
    let reported = output.objective.ok_or_else(|| format!("{label}: missing objective"))?;
    if rel_diff(f, reported) > AGREEMENT_TOL {
        return Err(format!(
            "{label}: reported objective {reported} but adjusted values give {f}"
        ));
    }
    Ok(())
}

fn non_blank_lines<R: BufRead>(r: R) -> std::io::Result<Vec<String>> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .collect()
}

/// Pairs non-blank input lines with output lines and re-validates each pair.
pub fn verify_jsonl<I: BufRead, O: BufRead>(input: I, output: O, cfg: &SolverConfig) -> std::io::Result<CheckReport> {
    let start = Instant::now();
    let inputs = non_blank_lines(input)?;
    let outputs = non_blank_lines(output)?;
    let mut outcomes: Vec<Result<f64, String>> = inputs
        .par_iter()
        .zip(outputs.par_iter())
        .enumerate()
        .map(|(i, (inp, out))| {
            let rec: AdjustOutput =
                serde_json::from_str(out).map_err(|e| format!("output line {}: unparseable: {e}", i + 1))?;
            verify_record(inp, &rec, cfg)
                .map(|_| 0.0)
                .map_err(|e| format!("line {}: {e}", i + 1))
        })
        .collect();
    if inputs.len() != outputs.len() {
        outcomes.push(Err(format!(
            "{} input records but {} output records",
            inputs.len(),
            outputs.len()
        )));
    }
    Ok(CheckReport::collect("adjust output", start, outcomes))
}
