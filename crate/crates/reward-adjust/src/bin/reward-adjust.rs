use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use reward_adjust::bench::{self, BenchConfig};
use reward_adjust::check::{self, CheckReport};
use reward_adjust::io::{adjust_stream, thread_pool};
use reward_adjust::sim::{ProbabilitySource, SimWorld, TrainerConfig, WorldSpec};
use reward_adjust::simulate::{self, Arm};
use reward_adjust_core::{Algorithm, SolverConfig, TiePolicy};

#[derive(Parser)]
#[command(
    name = "reward-adjust",
    version,
    about = "Variance-increasing reward adjustment for group-based policy optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adjust JSONL reward groups, one output record per input line.
    Adjust(AdjustArgs),
    /// Time enumeration against the one-pass solver on random instances.
    Bench(BenchArgs),
    /// Paired GRPO / GRPOVI runs on a random tabular world.
    Simulate(SimulateArgs),
    /// Run invariant and cross-solver suites, or re-validate adjust output.
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Free,
    Merge,
}

impl From<TieArg> for TiePolicy {
    fn from(t: TieArg) -> Self {
        match t {
            TieArg::Free => TiePolicy::Free,
            TieArg::Merge => TiePolicy::Merge,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    OnePass,
    Enumeration,
    Oracle,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::OnePass => Algorithm::OnePass,
            AlgorithmArg::Enumeration => Algorithm::Enumeration,
            AlgorithmArg::Oracle => Algorithm::Oracle,
        }
    }
}

#[derive(clap::Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "free")]
    tie_policy: TieArg,
    #[arg(long, value_enum, default_value = "one-pass")]
    algorithm: AlgorithmArg,
    /// Clamp out-of-range rewards into [min, max] instead of rejecting them.
    #[arg(long)]
    clip_rewards: bool,
    #[arg(long, default_value_t = 1e-12)]
    feas_tol: f64,
}

impl SolverArgs {
    fn config(&self) -> anyhow::Result<SolverConfig> {
        let cfg = SolverConfig {
            feas_tol: self.feas_tol,
            clip_rewards: self.clip_rewards,
            ..SolverConfig::default()
        }
        .with_tie_policy(self.tie_policy.into())
        .with_algorithm(self.algorithm.into());
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(clap::Args)]
struct AdjustArgs {
    /// Input JSONL file; stdin when omitted or "-".
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,50,100,500,1000,5000,10000")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Largest size for which enumeration is run.
    #[arg(long, default_value_t = bench::DEFAULT_ENUM_CAP)]
    enum_cap: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ArmArg {
    Grpo,
    Grpovi,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Initial,
    Current,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Number of sampling seeds, 0..N.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 8)]
    group_size: usize,
    /// KL penalty coefficient.
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    #[arg(long, default_value_t = 0.2)]
    clip_eps: f64,
    #[arg(long, value_enum, default_value = "both")]
    arm: ArmArg,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    #[arg(long, default_value_t = 4)]
    batch_prompts: usize,
    #[arg(long, default_value_t = 8)]
    prompts: usize,
    #[arg(long, default_value_t = 16)]
    responses: usize,
    #[arg(long, default_value_t = 1.0)]
    logit_std: f64,
    /// Seed of the reward table and initial logits.
    #[arg(long, default_value_t = 0)]
    world_seed: u64,
    #[arg(long, value_enum, default_value = "initial")]
    probability_source: SourceArg,
    /// Steps-to-threshold uses the initial mean expected reward plus this.
    #[arg(long, default_value_t = 0.1)]
    threshold_delta: f64,
    /// CSV destination; stdout when omitted (the summary then goes to stderr).
    #[arg(long)]
    output_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    All,
    Equivalence,
    Oracle,
    Feasibility,
    VarianceGain,
    InitialPolicyGain,
}

#[derive(clap::Args)]
struct CheckArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: SuiteArg,
    /// Cases per suite; each suite has its own default.
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Re-validate an adjust run: the input JSONL it was given...
    #[arg(long, requires = "adjust_output")]
    adjust_input: Option<PathBuf>,
    /// ...and the JSONL it produced.
    #[arg(long, requires = "adjust_input")]
    adjust_output: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

fn open_output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open_file(path: &PathBuf) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn cmd_adjust(args: AdjustArgs) -> anyhow::Result<u8> {
    let cfg = args.solver.config()?;
    let pool = thread_pool()?;
    let out = open_output(args.output.as_ref())?;
    let stats = match args.input.as_ref().filter(|p| p.as_os_str() != "-") {
        Some(p) => adjust_stream(open_file(p)?, out, &cfg, &pool),
        None => adjust_stream(io::stdin().lock(), out, &cfg, &pool),
    }
    .context("adjusting records")?;
    Ok(stats.exit_code() as u8)
}

fn cmd_bench(args: BenchArgs) -> anyhow::Result<u8> {
    if args.sizes.contains(&0) {
        bail!("sizes must be at least 1");
    }
    let rows = bench::run_bench(&BenchConfig {
        sizes: args.sizes,
        seed: args.seed,
        repeats: args.repeats,
        enum_cap: args.enum_cap,
    });
    bench::write_csv(&rows, open_output(args.output.as_ref())?)?;
    for row in rows.iter().filter(|r| !r.agree) {
        eprintln!("n={}: enumeration and one-pass disagree", row.n);
    }
    Ok(0)
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<u8> {
    let spec = WorldSpec {
        num_prompts: args.prompts,
        responses_per_prompt: args.responses,
        logit_std: args.logit_std,
        ..WorldSpec::default()
    };
    let world = SimWorld::random(spec, args.world_seed, 0)?;
    let cfg = TrainerConfig {
        group_size: args.group_size,
        batch_prompts: args.batch_prompts,
        learning_rate: args.learning_rate,
        kl_coeff: args.lambda,
        clip_eps: args.clip_eps,
        steps: args.steps,
        adjustment_probability_source: match args.probability_source {
            SourceArg::Initial => ProbabilitySource::InitialPolicy,
            SourceArg::Current => ProbabilitySource::CurrentPolicy,
        },
        ..TrainerConfig::default()
    };
    let arms: &[Arm] = match args.arm {
        ArmArg::Grpo => &[Arm::Grpo],
        ArmArg::Grpovi => &[Arm::Grpovi],
        ArmArg::Both => &[Arm::Grpo, Arm::Grpovi],
    };
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let sim = simulate::run_simulation(&world, &cfg, arms, &seeds, args.threshold_delta)?;
    simulate::write_csv(&sim.rows, open_output(args.output_csv.as_ref())?)?;

    let mut summary: Box<dyn Write> = if args.output_csv.is_some() {
        Box::new(io::stdout().lock())
    } else {
        Box::new(io::stderr().lock())
    };
    writeln!(summary, "threshold {:.6}", sim.threshold)?;
    for s in &sim.summaries {
        writeln!(
            summary,
            "{:<7} final expected reward {:.6} ± {:.6}   mean steps to threshold {:.1}",
            s.arm.name(),
            s.final_mean,
            s.final_std,
            s.mean_steps_to_threshold
        )?;
    }
    Ok(0)
}

fn print_report(r: &CheckReport) {
    let status = if r.passed() { "PASS" } else { "FAIL" };
    println!(
        "{status} {:<32} cases={:<6} failed={:<4} max_err={:.3e} time={:.2}s",
        r.name, r.cases, r.failed, r.max_error, r.elapsed_s
    );
    for f in &r.failures {
        println!("    {f}");
    }
}

fn cmd_check(args: CheckArgs) -> anyhow::Result<u8> {
    let cfg = args.solver.config()?;
    let mut reports = Vec::new();
    if let (Some(inp), Some(out)) = (&args.adjust_input, &args.adjust_output) {
        reports.push(check::verify_jsonl(open_file(inp)?, open_file(out)?, &cfg)?);
    } else {
        let run = |s: SuiteArg| args.suite == SuiteArg::All || args.suite == s;
        let cases = |default: usize| args.cases.unwrap_or(default);
        if run(SuiteArg::Equivalence) {
            reports.push(check::equivalence_suite(cases(10_000), 2..=64, args.seed));
        }
        if run(SuiteArg::Oracle) {
            reports.push(check::oracle_suite(cases(1_000), 5, args.seed));
        }
        if run(SuiteArg::Feasibility) {
            reports.push(check::feasibility_suite(cases(2_000), 32, args.seed));
        }
        for (suite, later) in [(SuiteArg::VarianceGain, false), (SuiteArg::InitialPolicyGain, true)] {
            if run(suite) {
                let t = check::variance_gain_suite(cases(1_000), 32, later, args.seed);
                let mut report = t.check.clone();
                report.name = format!("{} strict {}/{}", report.name, t.strict, t.non_degenerate);
                reports.push(report);
            }
        }
    }
    reports.iter().for_each(print_report);
    Ok(if reports.iter().all(CheckReport::passed) { 0 } else { 2 })
}

fn main() -> ExitCode {
    // usage errors are fatal (1); 2 is reserved for failed records or checks
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Adjust(a) => cmd_adjust(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
