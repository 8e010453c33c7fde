//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p reward-adjust --test acceptance`.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use reward_adjust::bench::bench_instance;
use reward_adjust::check::{
    equivalence_suite, feasibility_suite, oracle_suite, variance_gain_suite, verify_adjusted, verify_jsonl,
};
use reward_adjust::sim::{compare_grpo_grpovi, gradient_check, AdvantageScaling, SimWorld, TrainerConfig, WorldSpec};
use reward_adjust_core::{normalize, solve_enumeration, solve_one_pass, unsort, SolverConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn solver_equivalence() -> Outcome {
    let r = equivalence_suite(10_000, 2..=64, 20_240_601);
    let pass = r.passed() && r.elapsed_s < 30.0;
    outcome(
        pass,
        format!(
            "{} instances, n in 2..=64, {} failed, max rel diff {:.2e}, {:.2}s (limit 30s) {:?}",
            r.cases, r.failed, r.max_error, r.elapsed_s, r.failures
        ),
    )
}

fn oracle_cross_check() -> Outcome {
    let r = oracle_suite(1_000, 5, 7);
    let pass = r.passed() && r.elapsed_s < 60.0;
    outcome(
        pass,
        format!(
            "{} instances, n <= 5, {} failed, max rel diff {:.2e}, {:.2}s (limit 60s) {:?}",
            r.cases, r.failed, r.max_error, r.elapsed_s, r.failures
        ),
    )
}

fn runtime_scaling() -> Outcome {
    let cfg = SolverConfig::default();
    let group = bench_instance(0, 10_000);
    let ng = normalize(&group, &cfg).expect("valid instance");
    let t = Instant::now();
    let (one_pass, _) = solve_one_pass(&ng, &cfg).expect("one-pass");
    let t_one = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let enumeration = solve_enumeration(&ng, &cfg).expect("enumeration");
    let t_enum = t.elapsed().as_secs_f64();
    let ratio = t_enum / t_one.max(f64::MIN_POSITIVE);
    let agree = (one_pass.f_star - enumeration.f_star).abs() <= 1e-9 * enumeration.f_star.max(1.0);
    let feasible = unsort(&one_pass.z_star, &ng.perm)
        .map_err(|e| e.to_string())
        .and_then(|z| verify_adjusted(&group, &z, &cfg));
    let pass = t_one < 2.0 && ratio >= 100.0 && agree && feasible.is_ok();
    outcome(
        pass,
        format!(
            "n=10000: one-pass {t_one:.6}s, enumeration {t_enum:.3}s, speedup {ratio:.0}x (need >= 100x, one-pass < 2s), f {} vs {}",
            one_pass.f_star, enumeration.f_star
        ),
    )
}

fn feasibility() -> Outcome {
    let cfg = SolverConfig::default();
    let r = feasibility_suite(3_000, 40, 99);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let open = |name: &str| std::io::BufReader::new(std::fs::File::open(golden.join(name)).expect("golden file"));
    let files = verify_jsonl(open("adjust_input.jsonl"), open("adjust_expected.jsonl"), &cfg).expect("readable");
    let merge_cfg = SolverConfig::default().with_tie_policy(reward_adjust_core::TiePolicy::Merge);
    let merged =
        verify_jsonl(open("ties_input.jsonl"), open("ties_merge_expected.jsonl"), &merge_cfg).expect("readable");
    let pass = r.passed() && files.passed() && merged.passed();
    outcome(
        pass,
        format!(
            "{} random groups x all algorithms x both tie policies ({} failed), golden records ({} + {} failed) {:?}",
            r.cases,
            r.failed,
            files.failed,
            merged.failed,
            [r.failures, files.failures, merged.failures].concat()
        ),
    )
}

fn variance_gain() -> Outcome {
    let t = variance_gain_suite(1_000, 32, false, 314);
    let c = variance_gain_suite(1_000, 32, true, 315);
    let frac = t.strict_fraction();
    let pass = t.check.passed() && c.check.passed() && frac >= 0.95 && t.check.elapsed_s + c.check.elapsed_s < 30.0;
    outcome(
        pass,
        format!(
            "1000 triples, |Y| <= 32: max mean diff {:.2e}, min variance diff {:.2e}, strict increase {}/{} = {:.3} (need >= 0.95); initial-policy variant {} failed; {:.2}s {:?}",
            t.max_mean_diff,
            t.min_var_diff,
            t.strict,
            t.non_degenerate,
            frac,
            c.check.failed,
            t.check.elapsed_s + c.check.elapsed_s,
            [t.check.failures, c.check.failures].concat()
        ),
    )
}

fn acceleration() -> Outcome {
    let start = Instant::now();
    let world = SimWorld::random(WorldSpec::default(), 0, 0).expect("default world");
    let seeds: Vec<u64> = (0..20).collect();
    let cfg = TrainerConfig::default();
    let r = compare_grpo_grpovi(&world, &cfg, &seeds, 0.1).expect("simulation");
    let last = r.checkpoints.last().expect("checkpoints");
    let elapsed = start.elapsed().as_secs_f64();
    let pass = last.grpovi_mean >= last.grpo_mean
        && r.grpovi_steps_to_threshold <= r.grpo_steps_to_threshold
        && elapsed < 300.0;

    // not part of the criterion: the same comparison without dividing
    // advantages by the group standard deviation
    let ablation_cfg = TrainerConfig {
        advantage_scaling: AdvantageScaling::MeanOnly,
        ..cfg.clone()
    };
    let a = compare_grpo_grpovi(&world, &ablation_cfg, &seeds, 0.1).expect("simulation");
    let al = a.checkpoints.last().expect("checkpoints");
    outcome(
        pass,
        format!(
            "20 paired seeds, {} steps: final expected reward GRPO {:.4} ± {:.4}, GRPOVI {:.4} ± {:.4}; steps to {:.4}: GRPO {:.1}, GRPOVI {:.1}; {elapsed:.1}s (limit 300s) \
             [mean-only advantages, informational: final {:.4} vs {:.4}, steps {:.1} vs {:.1}]",
            cfg.steps,
            last.grpo_mean,
            last.grpo_std,
            last.grpovi_mean,
            last.grpovi_std,
            r.threshold,
            r.grpo_steps_to_threshold,
            r.grpovi_steps_to_threshold,
            al.grpo_mean,
            al.grpovi_mean,
            a.grpo_steps_to_threshold,
            a.grpovi_steps_to_threshold,
        ),
    )
}

fn gradient() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut errors = Vec::new();
    for seed in 0..10u64 {
        let spec = WorldSpec {
            num_prompts: 1 + (seed as usize % 3),
            responses_per_prompt: 1 + (seed as usize * 3) % 8,
            ..WorldSpec::default()
        };
        let world = SimWorld::random(spec, seed, seed + 100).expect("world");
        for adjust in [false, true] {
            let cfg = TrainerConfig {
                use_adjustment: adjust,
                ..TrainerConfig::default()
            };
            match gradient_check(&world.initial_policy(), &world, &cfg) {
                Ok(e) => worst = worst.max(e),
                Err(e) => errors.push(e.to_string()),
            }
        }
    }
    outcome(
        worst <= 1e-4 && errors.is_empty(),
        format!("10 seeds, |Y| <= 8, GRPO and GRPOVI batches: max relative error {worst:.2e} (limit 1e-4) {errors:?}"),
    )
}

fn cli_contract() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_reward-adjust");
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut problems = Vec::new();

    let out = Command::new(bin)
        .arg("adjust")
        .arg(golden.join("adjust_input.jsonl"))
        .output()
        .expect("spawn");
    let expected = std::fs::read_to_string(golden.join("adjust_expected.jsonl")).expect("golden");
    if out.stdout != expected.as_bytes() {
        problems.push("adjust output differs from golden file".to_owned());
    }
    if out.status.code() != Some(2) {
        problems.push(format!("golden run exit {:?}, expected 2", out.status.code()));
    }
    if !String::from_utf8_lossy(&out.stdout).starts_with(r#"{"id":"a","adjusted":[0.0,1.0,0.8],"#) {
        problems.push("first record is not (0,1,0.8)".to_owned());
    }

    let empty = Command::new(bin).args(["adjust", "/dev/null"]).output().expect("spawn");
    if empty.status.code() != Some(0) || !empty.stdout.is_empty() {
        problems.push("empty input contract".to_owned());
    }
    let missing = Command::new(bin)
        .args(["adjust", "/no/such/file"])
        .output()
        .expect("spawn");
    if missing.status.code() != Some(1) {
        problems.push("I/O failure exit code".to_owned());
    }

    let dir = tempfile::tempdir().expect("tempdir");
    let csv_path = dir.path().join("sim.csv");
    let sim = Command::new(bin)
        .args([
            "simulate",
            "--arm",
            "both",
            "--seeds",
            "4",
            "--steps",
            "24",
            "--output-csv",
        ])
        .arg(&csv_path)
        .output()
        .expect("spawn");
    let rows = csv::Reader::from_path(&csv_path)
        .map(|mut r| r.records().count())
        .unwrap_or(0);
    if sim.status.code() != Some(0) || rows != 64 {
        problems.push(format!("simulate produced {rows} rows, expected 64"));
    }

    let bench = Command::new(bin)
        .args(["bench", "--sizes", "1,10"])
        .output()
        .expect("spawn");
    let bench_rows = csv::Reader::from_reader(bench.stdout.as_slice()).records().count();
    if bench.status.code() != Some(0) || bench_rows != 2 {
        problems.push(format!("bench produced {bench_rows} rows, expected 2"));
    }
    outcome(
        problems.is_empty(),
        format!("golden adjust file, exit codes 0/1/2, simulate rows, bench rows {problems:?}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("solver equivalence", solver_equivalence),
        ("oracle cross-validation", oracle_cross_check),
        ("runtime scaling", runtime_scaling),
        ("feasibility suite", feasibility),
        ("exact variance gain", variance_gain),
        ("acceleration", acceleration),
        ("gradient check", gradient),
        ("cli contract", cli_contract),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        failed += usize::from(!o.pass);
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
