mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use busytime::algorithms::{run_algorithm, run_algorithm_on, AlgorithmKind};
use busytime::analysis::{check_valid_assignment, sigma, IntervalAssignment};
use busytime::generators::{
    adversary_opt_bounds, adversary_types, gen_random, killer_instance, tight_example, AdversarySource, KillerVariant,
    RandomParams,
};
use busytime::instance::{Instance, NormalizedLadder, TypeMenu};
use busytime::oracle::{exact_opt, OracleLimits};
use busytime::rational::format_rational;
use busytime::schedule::{schedule_cost, validate_schedule, Schedule, TypeSystem};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use report::{write_csv, write_json, ReportInput, RunReport};

#[derive(Parser, Debug)]
#[command(name = "busytime", version, about = "Online busy-time scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Run one algorithm on an instance file.
    Run(RunArgs),
    /// Run one algorithm against the adaptive adversary.
    Adversary(AdversaryArgs),
    /// Check a schedule or interval assignment against an instance.
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Random,
    Agreeable,
    #[value(name = "appendixA", alias = "killer")]
    Killer,
    Tight,
}

#[derive(Args, Debug)]
struct GenArgs {
    family: Family,
    /// Number of jobs (random, agreeable).
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Number of machine types drawn (random, agreeable); size parameter K (killer families).
    #[arg(long, default_value_t = 3)]
    k: u32,
    #[arg(long, default_value_t = 8)]
    horizon: i64,
    #[arg(long, default_value_t = 4)]
    window_max: i64,
    /// Costs 2^i with at least doubling capacities.
    #[arg(long)]
    power_ladder: bool,
    /// Killer variant: greedy, cost_efficient, lazy, ramp_up.
    #[arg(long, default_value = "greedy")]
    variant: String,
    /// Size parameter of the tight family.
    #[arg(long, default_value_t = 2)]
    q: u32,
    #[arg(long, env = "BUSYTIME_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
    /// Where to write the accompanying schedule (killer bound, tight solution).
    /// Defaults to `<output stem>.schedule.json`.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Where to write the tight family's interval assignment.
    /// Defaults to `<output stem>.assignment.json`.
    #[arg(long)]
    assignment: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OracleChoice {
    Exact,
    None,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_parser = parse_alg)]
    alg: AlgorithmKind,
    #[arg(long)]
    instance: PathBuf,
    /// Run on the normalized ladder (required for main, rejected otherwise).
    #[arg(long)]
    ladder: bool,
    #[arg(long, value_enum, default_value_t = OracleChoice::None)]
    oracle: OracleChoice,
    /// Dispatch trace, one JSON record per line.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Interval assignment built by the main algorithm.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Schedule on real machines.
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long)]
    report: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long, env = "BUSYTIME_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct AdversaryArgs {
    #[arg(long, value_parser = parse_alg)]
    alg: AlgorithmKind,
    #[arg(long = "M")]
    m: u64,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Released jobs, as an instance over the adversary's two types.
    #[arg(long)]
    instance_out: Option<PathBuf>,
    #[arg(long, env = "BUSYTIME_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Artifact {
    Schedule,
    Assignment,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    what: Artifact,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    artifact: PathBuf,
    /// Interpret assignment types as ladder rungs (main algorithm ledgers).
    #[arg(long)]
    ladder: bool,
}

fn parse_alg(s: &str) -> Result<AlgorithmKind, String> {
    s.parse()
}

/// Bad combinations of otherwise well-formed arguments; exit code 2 like clap's own errors.
#[derive(Debug)]
struct Usage(String);

/// Checks that ran and failed; exit code 1.
#[derive(Debug)]
struct Failed(String);

macro_rules! message_error {
    ($t:ty) => {
        impl std::fmt::Display for $t {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::error::Error for $t {}
    };
}

message_error!(Usage);
message_error!(Failed);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Gen(args) => gen(args),
        Command::Run(args) => run(args),
        Command::Adversary(args) => adversary(args),
        Command::Verify(args) => verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if err.is::<Usage>() => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn sibling(output: &Path, suffix: &str) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    output.with_file_name(format!("{stem}.{suffix}.json"))
}

fn instance_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into())
}

fn gen(args: GenArgs) -> Result<()> {
    match args.family {
        Family::Random | Family::Agreeable => {
            let params = RandomParams {
                horizon: args.horizon,
                window_max: args.window_max,
                agreeable: args.family == Family::Agreeable,
                power_ladder: args.power_ladder,
                ..RandomParams::new(args.n, args.k as usize, args.seed)
            };
            let instance = gen_random(&params)?;
            instance.write(&args.output)?;
            println!(
                "{}: {} jobs, {} machine types",
                args.output.display(),
                instance.n(),
                instance.machine_types.len()
            );
        }
        Family::Killer => {
            let variant: KillerVariant = args.variant.parse().map_err(|e: String| anyhow::Error::new(Usage(e)))?;
            let killer = killer_instance(variant, args.k)?;
            killer.instance.write(&args.output)?;
            let schedule_path = args.schedule.unwrap_or_else(|| sibling(&args.output, "schedule"));
            killer.bound.write(&schedule_path)?;
            println!(
                "{}: {} jobs; bound schedule of cost {} in {}",
                args.output.display(),
                killer.instance.n(),
                format_rational(&killer.bound_cost()),
                schedule_path.display()
            );
        }
        Family::Tight => {
            let tight = tight_example(args.q)?;
            tight.instance.write(&args.output)?;
            let schedule_path = args.schedule.unwrap_or_else(|| sibling(&args.output, "schedule"));
            let assignment_path = args.assignment.unwrap_or_else(|| sibling(&args.output, "assignment"));
            tight.schedule.write(&schedule_path)?;
            tight.assignment.write(&assignment_path)?;
            println!(
                "{}: {} jobs; sigma {}; schedule cost {}",
                args.output.display(),
                tight.instance.n(),
                sigma(&tight.assignment),
                format_rational(&schedule_cost(&tight.schedule, &tight.instance.machine_types))
            );
        }
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    if args.alg.uses_ladder() && !args.ladder {
        return Err(Usage(format!(
            "`--alg {}` runs on the normalized ladder and needs `--ladder`",
            args.alg
        ))
        .into());
    }
    if !args.alg.uses_ladder() && args.ladder {
        return Err(Usage(format!(
            "`--alg {}` runs on the real machine types; drop `--ladder`",
            args.alg
        ))
        .into());
    }
    if !args.alg.uses_ladder() && args.ledger.is_some() {
        return Err(Usage("only the main algorithm builds an interval assignment".into()).into());
    }
    let instance = Instance::read(&args.instance).with_context(|| format!("reading {}", args.instance.display()))?;

    let start = Instant::now();
    let run = run_algorithm(args.alg, &instance)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1000.0;
    info!("{} dispatched {} batches", args.alg, run.outcome.trace.len());

    let violations = validate_schedule(&instance, &run.real_schedule, &instance.machine_types)?;
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        return Err(Failed(format!("{} produced an invalid schedule", args.alg)).into());
    }
    if let Some(path) = &args.trace {
        run.outcome.trace.write(path)?;
    }
    if let (Some(path), Some(ledger)) = (&args.ledger, &run.ledger) {
        ledger.write(path)?;
    }
    if let Some(path) = &args.schedule {
        run.real_schedule.write(path)?;
    }

    let mut oracle_failure = None;
    let baseline = match args.oracle {
        OracleChoice::None => None,
        OracleChoice::Exact => match exact_opt(&instance.jobs, &instance.machine_types, OracleLimits::default()) {
            Ok(opt) => Some(("exact_opt", opt.cost)),
            Err(err) => {
                oracle_failure = Some(err);
                None
            }
        },
    };
    let id = instance_id(&args.instance);
    let row = RunReport::new(ReportInput {
        instance_id: &id,
        algorithm: args.alg.as_str(),
        type_system: if args.ladder { "ladder" } else { "real" },
        n: instance.n(),
        cost: run.real_cost,
        baseline,
        wall_ms,
        seed: args.seed,
    });
    emit(&args.report, args.json.as_deref(), &row)?;
    match oracle_failure {
        Some(err) => Err(Failed(format!("exact oracle refused: {err}")).into()),
        None => Ok(()),
    }
}

fn emit(report: &Path, json: Option<&Path>, row: &RunReport) -> Result<()> {
    let rows = std::slice::from_ref(row);
    write_csv(report, rows)?;
    if let Some(path) = json {
        write_json(path, rows)?;
    }
    match (&row.baseline_value, &row.ratio) {
        (Some(value), Some(ratio)) => println!(
            "{} on {}: cost {} vs {} {} (ratio {})",
            row.algorithm, row.instance_id, row.cost, row.baseline, value, ratio
        ),
        _ => println!("{} on {}: cost {}", row.algorithm, row.instance_id, row.cost),
    }
    Ok(())
}

fn adversary(args: AdversaryArgs) -> Result<()> {
    let types = adversary_types(args.m);
    let job_bound = (args.m.saturating_pow(4) / 2) as usize;
    // Main runs on the ladder; its large machine is the first rung realized by the large type.
    let large_from = if args.alg.uses_ladder() {
        let ladder = NormalizedLadder::build(&types, job_bound);
        (0..ladder.type_count())
            .find(|&k| ladder.rungs[k].realization.iter().any(|&(t, _)| t == 1))
            .context("the large type never appears on the ladder")?
    } else {
        1
    };
    let mut source = AdversarySource::new(args.m, large_from).map_err(|e| Usage(e.to_string()))?;
    let start = Instant::now();
    let run = run_algorithm_on(args.alg, &mut source, &types, job_bound)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1000.0;
    let state = source.state();
    if state.suppressed_triggers > 0 {
        info!(
            "{} release triggers after the last group were ignored",
            state.suppressed_triggers
        );
    }
    let bounds = adversary_opt_bounds(args.m, &run.outcome.trace, &run.outcome.jobs, large_from)?;

    if let Some(path) = &args.trace {
        run.outcome.trace.write(path)?;
    }
    if let Some(path) = &args.instance_out {
        run.outcome.instance(types.clone()).write(path)?;
    }
    let id = format!("adversary-M{}", args.m);
    let row = RunReport::new(ReportInput {
        instance_id: &id,
        algorithm: args.alg.as_str(),
        type_system: if args.alg.uses_ladder() { "ladder" } else { "real" },
        n: run.outcome.jobs.len(),
        cost: run.real_cost,
        baseline: Some(("adversary_bound", bounds.best)),
        wall_ms,
        seed: args.seed,
    });
    emit(&args.report, args.json.as_deref(), &row)
}

fn verify(args: VerifyArgs) -> Result<()> {
    let instance = Instance::read(&args.instance).with_context(|| format!("reading {}", args.instance.display()))?;
    let ladder = NormalizedLadder::build(&instance.machine_types, instance.n());
    match args.what {
        Artifact::Schedule => {
            let schedule = Schedule::read(&args.artifact)?;
            let (violations, cost) = match schedule.type_system {
                TypeSystem::Real => (
                    validate_schedule(&instance, &schedule, &instance.machine_types)?,
                    schedule_cost(&schedule, &instance.machine_types),
                ),
                TypeSystem::Virtual => (
                    validate_schedule(&instance, &schedule, &ladder)?,
                    schedule_cost(&schedule, &ladder),
                ),
            };
            report_violations(&violations)?;
            println!(
                "valid {} schedule: {} batches, cost {}",
                schedule.type_system,
                schedule.batches.len(),
                format_rational(&cost)
            );
        }
        Artifact::Assignment => {
            let assignment = IntervalAssignment::read(&args.artifact)?;
            let violations = if args.ladder {
                check_valid_assignment(&instance.jobs, &assignment, &ladder)?
            } else {
                check_valid_assignment(&instance.jobs, &assignment, &instance.machine_types)?
            };
            report_violations(&violations)?;
            println!(
                "valid assignment: {} intervals, sigma={}",
                assignment.len(),
                sigma(&assignment)
            );
        }
    }
    Ok(())
}

fn report_violations<V: std::fmt::Display>(violations: &[V]) -> Result<()> {
    if violations.is_empty() {
        return Ok(());
    }
    for v in violations {
        eprintln!("violation: {v}");
    }
    bail!(Failed(format!("{} violations", violations.len())))
}
