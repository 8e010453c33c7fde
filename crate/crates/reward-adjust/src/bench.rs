//! Enumeration vs one-pass comparison on random instances.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reward_adjust_core::{normalize, solve_enumeration, solve_one_pass, NormalizedGroup, RewardGroup, SolverConfig};
use serde::Serialize;

pub const DEFAULT_SIZES: [usize; 7] = [10, 50, 100, 500, 1000, 5000, 10000];
pub const DEFAULT_ENUM_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    /// Empty when enumeration was skipped for exceeding the cap.
    pub f_enumeration: Option<f64>,
    pub f_one_pass: f64,
    pub time_enumeration_s: Option<f64>,
    pub time_one_pass_s: f64,
    pub seed: u64,
    /// Whether the two objectives agree within `obj_tol` (true when skipped).
    pub agree: bool,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub seed: u64,
    pub repeats: usize,
    pub enum_cap: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: DEFAULT_SIZES.to_vec(),
            seed: 0,
            repeats: 1,
            enum_cap: DEFAULT_ENUM_CAP,
        }
    }
}

/// Random instance of size `n`: probabilities i.i.d. uniform then normalized,
/// rewards i.i.d. uniform on `[0, 1]` in non-increasing order. The stream is
/// keyed by `(seed, n)` so a row can be regenerated on its own.
pub fn bench_instance(seed: u64, n: usize) -> RewardGroup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    // 1 - U[0,1) lies in (0, 1], so every weight is positive
    let weights: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    let mut rewards: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
    rewards.sort_by(|a, b| b.total_cmp(a));
    RewardGroup::new(format!("bench-{n}"), rewards, 0.0, 1.0)
        .with_probabilities(weights.iter().map(|w| w / total).collect())
}

/// Runs `f` `repeats` times and returns the last result with the mean time.
fn timed<T>(repeats: usize, mut f: impl FnMut() -> T) -> (T, f64) {
    let start = Instant::now();
    let mut out = f();
    for _ in 1..repeats {
        out = f();
    }
    (out, start.elapsed().as_secs_f64() / repeats as f64)
}

pub fn bench_size(ng: &NormalizedGroup, n: usize, cfg: &BenchConfig, solver: &SolverConfig) -> BenchRow {
    let repeats = cfg.repeats.max(1);
    let (one_pass, time_one_pass_s) = timed(repeats, || solve_one_pass(ng, solver).expect("valid instance").0);
    let (f_enumeration, time_enumeration_s) = if n <= cfg.enum_cap {
        let (e, t) = timed(repeats, || solve_enumeration(ng, solver).expect("valid instance"));
        (Some(e.f_star), Some(t))
    } else {
        (None, None)
    };
    let f = one_pass.f_star;
    let agree = f_enumeration.is_none_or(|fe| (fe - f).abs() <= solver.obj_tol * fe.abs().max(1.0));
    BenchRow {
        n,
        f_enumeration,
        f_one_pass: f,
        time_enumeration_s,
        time_one_pass_s,
        seed: cfg.seed,
        agree,
    }
}

/// One row per size. Sizes are run one after another so timings do not
/// compete for cores.
pub fn run_bench(cfg: &BenchConfig) -> Vec<BenchRow> {
    let solver = SolverConfig::default();
    cfg.sizes
        .iter()
        .map(|&n| {
            let ng = normalize(&bench_instance(cfg.seed, n), &solver).expect("generated instances are valid");
            bench_size(&ng, n, cfg, &solver)
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[BenchRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_reproducible_and_sorted() {
        let a = bench_instance(7, 50);
        assert_eq!(a, bench_instance(7, 50));
        assert_ne!(a.rewards, bench_instance(8, 50).rewards);
        assert!(a.rewards.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn small_sizes_agree() {
        let cfg = BenchConfig {
            sizes: vec![1, 10],
            seed: 3,
            ..BenchConfig::default()
        };
        let rows = run_bench(&cfg);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.agree && r.seed == 3));
        assert_eq!(rows[0].f_enumeration, Some(rows[0].f_one_pass));
    }

    #[test]
    fn cap_skips_enumeration() {
        let cfg = BenchConfig {
            sizes: vec![20],
            enum_cap: 10,
            ..BenchConfig::default()
        };
        let row = &run_bench(&cfg)[0];
        assert!(row.f_enumeration.is_none() && row.time_enumeration_s.is_none() && row.agree);
    }
}
