mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

/// Finite-horizon decision processes on semi-Markov dynamics.
#[derive(Debug, Parser)]
#[command(name = "smdp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a preset environment file.
    ExportEnv(ExportEnvArgs),
    /// Check an environment file and list every violation.
    Validate {
        env: PathBuf,
    },
    /// Solve by backward induction; writes values.json, q.json and policy.json.
    Solve {
        env: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Evaluate a policy by reward iteration.
    Evaluate {
        env: PathBuf,
        policy: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Cross-check v_0(x, 0) against path enumeration.
        #[arg(long)]
        brute_force: bool,
    },
    /// Sample episodes under a policy into a JSON-lines trace.
    Simulate(SimulateArgs),
    /// Train a Q-table and write per-episode rewards.
    Train(TrainArgs),
    /// Aggregate rewards CSVs (one per replication) into batch metrics.
    Curves(CurvesArgs),
    /// Exact first inter-jump law under a policy and its geometric verdict.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Coins,
}

#[derive(Debug, Args)]
struct ExportEnvArgs {
    preset: Preset,
    /// Heads probability of one coin; repeat per coin.
    #[arg(long = "p", required = true, allow_negative_numbers = true)]
    p: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    t_cheat: usize,
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    r_cheat: f64,
    #[arg(long, default_value_t = 200)]
    horizon: usize,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    env: PathBuf,
    policy: PathBuf,
    #[arg(long, default_value_t = 1)]
    episodes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `uniform` or a state name or index.
    #[arg(long, default_value = "uniform")]
    start: String,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScheduleKind {
    Constant,
    PaperStep,
    Custom,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitKind {
    Uniform,
    Constant,
}

#[derive(Debug, Args)]
struct TrainArgs {
    env: PathBuf,
    #[arg(long, default_value_t = 2000)]
    episodes: usize,
    #[arg(long, value_enum, default_value = "constant")]
    schedule: ScheduleKind,
    /// Rate of the constant schedule.
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    /// Comma-separated per-episode rates of the custom schedule.
    #[arg(long, value_delimiter = ',')]
    rates: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    init: InitKind,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    init_lo: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    init_hi: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    init_value: f64,
    /// `uniform` or a state name or index.
    #[arg(long, default_value = "uniform")]
    start: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rewards CSV (episode, total_reward).
    #[arg(long)]
    rewards: PathBuf,
    /// Sup-error CSV against the exact solution (episode, sup_error).
    #[arg(long)]
    errors: Option<PathBuf>,
    /// Final Q-table file.
    #[arg(long)]
    q_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurvesArgs {
    /// Rewards CSVs, one per replication, aggregated in the order given.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 50)]
    batch_size: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    env: PathBuf,
    policy: PathBuf,
    /// State name or index the process starts in at age 0.
    #[arg(long, default_value = "0")]
    start: String,
    /// Largest inter-jump time listed; defaults to the horizon.
    #[arg(long)]
    k_max: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ExportEnv(args) => commands::export_env(args),
        Command::Validate { env } => commands::validate(&env),
        Command::Solve { env, out_dir } => commands::solve(&env, &out_dir),
        Command::Evaluate { env, policy, out, brute_force } => commands::evaluate(&env, &policy, &out, brute_force),
        Command::Simulate(args) => commands::simulate(args),
        Command::Train(args) => commands::train(args),
        Command::Curves(args) => commands::curves(args),
        Command::Diagnose(args) => commands::diagnose(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
