//! Command-line front end: environment generation, experiment execution,
//! aggregation, bound auditing and environment validation.
//!
//! Exit codes are stable: 0 success, 1 usage error, 2 validation error,
//! 3 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::env::{self, EnvironmentSpec};
use crate::error::Error;
use crate::files::{self, ConfigDraft};
use crate::harness;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Outcome of one CLI invocation: a stable exit code plus a human-readable
/// summary for the diagnostic stream.
#[derive(Debug)]
pub struct CommandResult {
    pub exit_code: i32,
    pub message: String,
}

struct Failure {
    code: i32,
    message: String,
}

type CmdResult = std::result::Result<String, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidParameter(_)
            | Error::DegenerateInput(_)
            | Error::Validation(_)
            | Error::UnsupportedEnvironment(_)
            | Error::IndexOutOfRange { .. }
            | Error::Parse { .. }
            | Error::ScheduleMismatch(_) => EXIT_VALIDATION,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
            Error::Io { .. } | Error::Replicate { .. } => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "duelbench",
    about = "Dueling-bandit evaluation toolkit: synthetic environments, seeded replicate runs, regret aggregation and bound audits",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a preference-matrix file for a synthetic environment.
    GenEnv(GenEnvArgs),
    /// Run seeded replicates of a policy and write a results CSV.
    Run(RunArgs),
    /// Aggregate one or more results CSVs into mean/stderr columns.
    Aggregate(AggregateArgs),
    /// Audit replicate regret against the theoretical bound.
    Bound(BoundArgs),
    /// Print diagnostics for a preference-matrix file.
    ValidateEnv(ValidateEnvArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindFlag {
    Cycle,
    Utility,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmFlag {
    MergeDts,
    MergeRucb,
    SelfSparring,
}

impl AlgorithmFlag {
    fn name(self) -> &'static str {
        match self {
            AlgorithmFlag::MergeDts => "merge-dts",
            AlgorithmFlag::MergeRucb => "merge-rucb",
            AlgorithmFlag::SelfSparring => "self-sparring",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RegretFlag {
    Auto,
    Condorcet,
    Copeland,
}

impl RegretFlag {
    fn name(self) -> &'static str {
        match self {
            RegretFlag::Auto => "auto",
            RegretFlag::Condorcet => "condorcet",
            RegretFlag::Copeland => "copeland",
        }
    }
}

#[derive(Args)]
struct GenEnvArgs {
    /// Environment family to generate.
    #[arg(long, value_enum)]
    kind: KindFlag,
    /// Number of suboptimal rankers on the ring (cycle kind; odd, >= 3).
    #[arg(long)]
    suboptimal: Option<usize>,
    /// Probability with which ranker 0 beats each other ranker (cycle kind).
    #[arg(long)]
    p_condorcet: Option<f64>,
    /// Probability with which each ring ranker beats its left neighbours
    /// (cycle kind).
    #[arg(long)]
    p_cycle: Option<f64>,
    /// Comma-separated utilities (utility kind).
    #[arg(long)]
    utilities: Option<String>,
    /// Output matrix file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Run-config file (`key = value` lines); flags override file keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preference-matrix file (shorthand for env.kind=file).
    #[arg(long)]
    env: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<AlgorithmFlag>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    c_override: Option<f64>,
    /// Base seed; replicate r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Number of regret checkpoints per replicate.
    #[arg(long)]
    checkpoints: Option<usize>,
    #[arg(long)]
    regret: Option<RegretFlag>,
    /// Cap on concurrent replicates (default: logical cores; env var
    /// DUELBENCH_THREADS as fallback).
    #[arg(long)]
    threads: Option<usize>,
    /// Output results CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AggregateArgs {
    /// Results CSVs to pool (schedules must match).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output aggregate CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    /// Results CSV produced by `run`.
    #[arg(long)]
    results: PathBuf,
    /// Run-config file the results were produced with.
    #[arg(long)]
    config: PathBuf,
    /// Preference-matrix file of the environment.
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct ValidateEnvArgs {
    /// Preference-matrix file to check.
    #[arg(long)]
    env: PathBuf,
}

/// Parses and executes a full command line (including argv[0]).
pub fn execute<I, T>(args: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version as "errors" with successful exit.
            let code = if e.exit_code() == 0 { EXIT_OK } else { EXIT_USAGE };
            return CommandResult {
                exit_code: code,
                message: e.render().to_string(),
            };
        }
    };
    let outcome = match cli.command {
        Command::GenEnv(args) => cmd_gen_env(args),
        Command::Run(args) => cmd_run(args),
        Command::Aggregate(args) => cmd_aggregate(args),
        Command::Bound(args) => cmd_bound(args),
        Command::ValidateEnv(args) => cmd_validate_env(args),
    };
    match outcome {
        Ok(message) => CommandResult {
            exit_code: EXIT_OK,
            message,
        },
        Err(f) => CommandResult {
            exit_code: f.code,
            message: f.message,
        },
    }
}

fn require_input(path: &Path, what: &str) -> std::result::Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} not found", path.display())))
    }
}

fn print_diagnostics(diag: &crate::types::EnvDiagnostics) {
    match diag.condorcet {
        Some(w) => println!("condorcet winner: ranker {w}"),
        None => println!("condorcet winner: none"),
    }
    let (bmin, bmax) = diag
        .borda_scores
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &b| (lo.min(b), hi.max(b)));
    println!("copeland value: {:.6}", diag.copeland_value);
    println!("borda extremes: max {bmax:.6}, min {bmin:.6}");
    match diag.delta_min {
        Some(d) => println!("delta_min: {d:.6}"),
        None => println!("delta_min: undefined (no distinguishable pair)"),
    }
    println!("uninformative rankers: {}", diag.uninformative_count);
    println!(
        "assumption 1 (distinguishability): {}",
        if diag.assumption1_holds { "holds" } else { "violated" }
    );
    println!(
        "assumption 2 (uninformative <= 1/3): {}",
        if diag.assumption2_holds { "holds" } else { "violated" }
    );
}

fn cmd_gen_env(args: GenEnvArgs) -> CmdResult {
    let spec = match args.kind {
        KindFlag::Cycle => EnvironmentSpec::Cycle {
            n_suboptimal: args
                .suboptimal
                .ok_or_else(|| usage("--kind cycle requires --suboptimal"))?,
            p_condorcet: args
                .p_condorcet
                .ok_or_else(|| usage("--kind cycle requires --p-condorcet"))?,
            p_cycle: args
                .p_cycle
                .ok_or_else(|| usage("--kind cycle requires --p-cycle"))?,
        },
        KindFlag::Utility => EnvironmentSpec::Utility {
            utilities: files::parse_utilities(
                &args
                    .utilities
                    .ok_or_else(|| usage("--kind utility requires --utilities"))?,
            )?,
        },
    };
    let matrix = spec.build()?;
    files::write_matrix_file(&args.out, &matrix)?;
    let diag = env::diagnose(&matrix);
    print_diagnostics(&diag);
    Ok(format!(
        "wrote {} ({} rankers)",
        args.out.display(),
        matrix.k()
    ))
}

fn run_draft(args: &RunArgs) -> std::result::Result<ConfigDraft, Failure> {
    let mut draft = match &args.config {
        Some(path) => {
            require_input(path, "config file")?;
            files::read_config_file(path)?
        }
        None => ConfigDraft::default(),
    };
    if let Some(envp) = &args.env {
        require_input(envp, "environment file")?;
        draft.env_kind = Some("file".to_string());
        draft.env_path = Some(envp.clone());
    }
    let flags = ConfigDraft {
        algorithm: args.algorithm.map(|a| a.name().to_string()),
        alpha: args.alpha,
        batch_size: args.batch_size,
        horizon: args.horizon,
        epsilon: args.epsilon,
        c_override: args.c_override,
        base_seed: args.seed,
        replicates: args.replicates,
        checkpoint_count: args.checkpoints,
        regret: args.regret.map(|r| r.name().to_string()),
        ..ConfigDraft::default()
    };
    Ok(draft.overlay(flags))
}

fn thread_cap(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("DUELBENCH_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let threads = thread_cap(args.threads);
    let config = run_draft(&args)?.resolve()?;
    let started = Instant::now();
    let ledgers = harness::run_replicates_with_threads(&config, threads)?;
    let elapsed = started.elapsed().as_secs_f64();
    files::write_results_csv(&args.out, &ledgers)?;

    // winner tally
    let mut tally: Vec<(Option<usize>, usize)> = Vec::new();
    for l in &ledgers {
        match tally.iter_mut().find(|(w, _)| *w == l.final_winner) {
            Some((_, n)) => *n += 1,
            None => tally.push((l.final_winner, 1)),
        }
    }
    tally.sort_by(|a, b| b.1.cmp(&a.1));
    let tally_text: Vec<String> = tally
        .iter()
        .map(|(w, n)| match w {
            Some(w) => format!("ranker {w}: {n}"),
            None => format!("none: {n}"),
        })
        .collect();
    println!("final winners: {}", tally_text.join(", "));

    let total_steps = config.horizon as f64 * config.replicates as f64;
    let rate = if elapsed > 0.0 { total_steps / elapsed } else { f64::INFINITY };
    println!("throughput: {rate:.0} steps/s over {} replicates", ledgers.len());
    Ok(format!(
        "wrote {} ({} replicates x {} steps)",
        args.out.display(),
        config.replicates,
        config.horizon
    ))
}

fn cmd_aggregate(args: AggregateArgs) -> CmdResult {
    let mut ledgers = Vec::new();
    for input in &args.inputs {
        require_input(input, "results CSV")?;
        ledgers.extend(files::read_results_csv(input)?);
    }
    let series = harness::aggregate(&ledgers)?;
    files::write_aggregate_csv(&args.out, &series)?;
    Ok(format!(
        "wrote {} ({} replicates, {} checkpoints)",
        args.out.display(),
        series.n,
        series.checkpoints.len()
    ))
}

fn cmd_bound(args: BoundArgs) -> CmdResult {
    require_input(&args.results, "results CSV")?;
    require_input(&args.config, "config file")?;
    require_input(&args.env, "environment file")?;

    let mut draft = files::read_config_file(&args.config)?;
    draft.env_kind = Some("file".to_string());
    draft.env_path = Some(args.env.clone());
    draft = draft.overlay(ConfigDraft {
        alpha: args.alpha,
        batch_size: args.batch_size,
        horizon: args.horizon,
        epsilon: args.epsilon,
        ..ConfigDraft::default()
    });
    let config = draft.resolve()?;

    let matrix = env::load_matrix(&args.env)?;
    let diag = env::diagnose(&matrix);
    let ledgers = files::read_results_csv(&args.results)?;
    let report = harness::bound_audit(&config, &ledgers, &diag)?;

    if let Some(reason) = &report.not_applicable {
        println!("bound not applicable: {reason}");
        return Ok("bound not applicable (warning)".to_string());
    }
    match report.bound {
        Some(b) => println!("theoretical bound: {b:.6e}"),
        None => println!("theoretical bound: trivial (single ranker)"),
    }
    for (i, (regret, ok)) in report.per_replicate.iter().enumerate() {
        println!(
            "replicate {i}: final regret {regret:.6} -> {}",
            if *ok { "within bound" } else { "VIOLATION" }
        );
    }
    println!(
        "violations: {} of {} (allowed {})",
        report.violations,
        report.per_replicate.len(),
        report.allowed
    );
    println!("verdict: {}", if report.pass { "PASS" } else { "FAIL" });
    Ok(format!(
        "audit {}: {} violations",
        if report.pass { "passed" } else { "failed" },
        report.violations
    ))
}

fn cmd_validate_env(args: ValidateEnvArgs) -> CmdResult {
    require_input(&args.env, "environment file")?;
    let matrix = env::load_matrix(&args.env)?;
    let diag = env::diagnose(&matrix);
    println!("rankers: {}", matrix.k());
    print_diagnostics(&diag);
    if matrix.k() >= 2 {
        let zeta = &diag.copeland_scores;
        let winners: Vec<usize> = (0..matrix.k())
            .filter(|&i| zeta[i] == diag.copeland_value)
            .collect();
        println!("copeland winners: {winners:?}");
    }
    Ok(format!("{} is a valid preference matrix", args.env.display()))
}
