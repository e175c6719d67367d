use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use smdp_core::bellman::{brute_force_value, policy_evaluate, solve_bellman};
use smdp_core::coins::{build_coins_env, CoinsParams};
use smdp_core::diagnostics::{geometric_consistency, interjump_pmf, GeometricVerdict};
use smdp_core::format::{
    env_hash, policy_hash, read_env, read_policy, read_rewards_csv, write_env, write_errors_csv, write_metrics_csv,
    write_policy, write_q_table, write_rewards_csv, write_trace, write_value_table, FormatError, Provenance,
    TraceHeader, TOOL_VERSION,
};
use smdp_core::metrics::{aggregate, batch_metrics};
use smdp_core::qlearn::{self, LearningSchedule, QInit, StartRule, TrainConfig};
use smdp_core::rng::RngKey;
use smdp_core::simulate::{run_episode, uniform_start};
use smdp_core::{EnvSpec, ExtendedState, Policy, SmdpError};

use crate::{CurvesArgs, DiagnoseArgs, ExportEnvArgs, InitKind, Preset, ScheduleKind, SimulateArgs, TrainArgs};

/// Tolerance of the brute-force cross-check.
const CROSS_CHECK_TOL: f64 = 1e-12;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Invalid(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Invalid(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<SmdpError> for CliError {
    fn from(e: SmdpError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Model(m) => m.into(),
            other => CliError::Io(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn located(path: &Path, e: FormatError) -> CliError {
    match e {
        FormatError::Model(m) => CliError::Invalid(format!("{}: {m}", path.display())),
        other => io_error(path, other),
    }
}

/// Loads an environment, rejecting any validation issue.
fn load_env(path: &Path) -> Result<EnvSpec, CliError> {
    let (env, report) = read_env(&read_text(path)?).map_err(|e| located(path, e))?;
    if !report.is_empty() {
        return Err(CliError::Invalid(format!("{} is not a valid environment:\n{report}", path.display())));
    }
    Ok(env)
}

/// Loads a policy written for `env`.
fn load_policy(path: &Path, env: &EnvSpec, hash: &str) -> Result<Policy, CliError> {
    let (policy, provenance) = read_policy(&read_text(path)?).map_err(|e| located(path, e))?;
    if provenance.env_hash != hash {
        return Err(CliError::Invalid(format!(
            "{} was written for environment {}, not {hash}",
            path.display(),
            provenance.env_hash
        )));
    }
    policy.check(env)?;
    Ok(policy)
}

fn parse_state(env: &EnvSpec, text: &str) -> Result<usize, CliError> {
    if let Some(x) = env.state_names().iter().position(|name| name == text) {
        return Ok(x);
    }
    match text.parse::<usize>() {
        Ok(x) if x < env.n_states() => Ok(x),
        _ => Err(CliError::Usage(format!("unknown state `{text}`"))),
    }
}

fn parse_start(env: &EnvSpec, text: &str) -> Result<StartRule, CliError> {
    if text == "uniform" {
        Ok(StartRule::Uniform)
    } else {
        parse_state(env, text).map(StartRule::Fixed)
    }
}

fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes the provenance sidecar `<path>.meta.json` of a CSV output.
fn write_meta(path: &Path, command: &str, env_hash: Option<&str>, details: serde_json::Value) -> Result<(), CliError> {
    let meta = json!({
        "tool_version": TOOL_VERSION,
        "command": command,
        "env_hash": env_hash,
        "details": details,
    });
    let mut text = serde_json::to_string_pretty(&meta).expect("plain data");
    text.push('\n');
    write_text(&meta_path(path), &text)
}

fn finish<W: Write>(path: &Path, mut out: W) -> Result<(), CliError> {
    out.flush().map_err(|e| io_error(path, e))
}

pub fn export_env(args: ExportEnvArgs) -> Result<(), CliError> {
    let env = match args.preset {
        Preset::Coins => build_coins_env(&CoinsParams::new(args.p, args.t_cheat, args.r_cheat, args.horizon))?,
    };
    let text = write_env(&env);
    match &args.out {
        Some(path) => write_text(path, &text)?,
        None => print!("{text}"),
    }
    eprintln!("env hash {} (tool version {TOOL_VERSION})", env_hash(&env));
    Ok(())
}

pub fn validate(path: &Path) -> Result<(), CliError> {
    let (env, report) = read_env(&read_text(path)?).map_err(|e| located(path, e))?;
    if report.is_empty() {
        println!("valid: {} (env hash {}, tool version {TOOL_VERSION})", path.display(), env_hash(&env));
        Ok(())
    } else {
        for issue in &report.issues {
            println!("{issue}");
        }
        Err(CliError::Invalid(format!("{} issue(s) in {}", report.issues.len(), path.display())))
    }
}

pub fn solve(env_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let env = load_env(env_path)?;
    let provenance = Provenance::new(env_hash(&env));
    let solution = solve_bellman(&env)?;
    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    write_text(&out_dir.join("values.json"), &write_value_table(&solution.values, &provenance))?;
    write_text(&out_dir.join("q.json"), &write_q_table(&solution.q, &provenance))?;
    write_text(&out_dir.join("policy.json"), &write_policy(&solution.policy, &provenance))?;
    for x in 0..env.n_states() {
        let v = solution.values.get(0, ExtendedState::new(x, 0))?;
        println!("v_0({}, 0) = {v}", env.state_names()[x]);
    }
    Ok(())
}

pub fn evaluate(env_path: &Path, policy_path: &Path, out: &Path, brute_force: bool) -> Result<(), CliError> {
    let env = load_env(env_path)?;
    let hash = env_hash(&env);
    let policy = load_policy(policy_path, &env, &hash)?;
    let values = policy_evaluate(&env, &policy)?;
    if brute_force {
        for x in 0..env.n_states() {
            let start = ExtendedState::new(x, 0);
            let exact = values.get(0, start)?;
            let enumerated = brute_force_value(&env, &policy, start)?;
            if (exact - enumerated).abs() > CROSS_CHECK_TOL {
                return Err(CliError::Invalid(format!(
                    "cross-check failed at {start}: reward iteration {exact}, path enumeration {enumerated}"
                )));
            }
            println!("cross-check {start}: {exact} (enumeration {enumerated})");
        }
    }
    write_text(out, &write_value_table(&values, &Provenance::new(hash)))
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let env = load_env(&args.env)?;
    let hash = env_hash(&env);
    let policy = load_policy(&args.policy, &env, &hash)?;
    let start = parse_start(&env, &args.start)?;
    let mut traces = Vec::with_capacity(args.episodes as usize);
    for episode in 0..args.episodes {
        let key = RngKey::new(args.seed, episode);
        let x = match start {
            StartRule::Fixed(x) => x,
            StartRule::Uniform => uniform_start(&env, key),
        };
        traces.push(run_episode(&env, &mut &policy, x, key)?);
    }
    let header = TraceHeader::new(hash, policy_hash(&policy), args.seed, traces.len());
    let mut out = create(&args.out)?;
    write_trace(&mut out, &header, &traces).map_err(|e| io_error(&args.out, e))?;
    finish(&args.out, out)
}

#[derive(Serialize)]
struct TrainDetails<'a> {
    seed: u64,
    episodes: usize,
    schedule: String,
    epsilon: f64,
    init: String,
    start: &'a str,
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let env = load_env(&args.env)?;
    let hash = env_hash(&env);
    let schedule = match args.schedule {
        ScheduleKind::Constant => LearningSchedule::Constant(args.alpha),
        ScheduleKind::PaperStep => LearningSchedule::PaperStep,
        ScheduleKind::Custom if args.rates.is_empty() => {
            return Err(CliError::Usage("--schedule custom needs --rates".into()))
        }
        ScheduleKind::Custom => LearningSchedule::Custom(args.rates.clone()),
    };
    let q_init = match args.init {
        InitKind::Uniform => QInit::Uniform { lo: args.init_lo, hi: args.init_hi },
        InitKind::Constant => QInit::Constant(args.init_value),
    };
    let config = TrainConfig {
        episodes: args.episodes,
        schedule,
        epsilon: args.epsilon,
        q_init,
        start: parse_start(&env, &args.start)?,
        seed: args.seed,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let reference = match args.errors {
        Some(_) => Some(solve_bellman(&env)?.q),
        None => None,
    };
    let result = qlearn::train(&env, &config, reference.as_ref())?;

    let details = serde_json::to_value(TrainDetails {
        seed: config.seed,
        episodes: config.episodes,
        schedule: format!("{:?}", config.schedule),
        epsilon: config.epsilon,
        init: format!("{:?}", config.q_init),
        start: &args.start,
    })
    .expect("plain data");
    let out = create(&args.rewards)?;
    write_rewards_csv(out, &result.rewards).map_err(|e| located(&args.rewards, e))?;
    write_meta(&args.rewards, "train", Some(&hash), details.clone())?;
    if let (Some(path), Some(errors)) = (&args.errors, &result.errors) {
        write_errors_csv(create(path)?, errors).map_err(|e| located(path, e))?;
        write_meta(path, "train", Some(&hash), details)?;
    }
    if let Some(path) = &args.q_out {
        write_text(path, &write_q_table(&result.q, &Provenance::new(hash)))?;
    }
    Ok(())
}

/// Env hash recorded in an input's sidecar, if any.
fn sidecar_env_hash(path: &Path) -> Option<String> {
    let text = fs::read_to_string(meta_path(path)).ok()?;
    let meta: serde_json::Value = serde_json::from_str(&text).ok()?;
    meta.get("env_hash")?.as_str().map(str::to_string)
}

pub fn curves(args: CurvesArgs) -> Result<(), CliError> {
    if args.batch_size == 0 {
        return Err(CliError::Usage("--batch-size must be at least 1".into()));
    }
    let mut series = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let file = File::open(path).map_err(|e| io_error(path, e))?;
        let rewards = read_rewards_csv(file).map_err(|e| located(path, e))?;
        series.push(batch_metrics(&rewards, args.batch_size)?);
    }
    let metrics = aggregate(&series)?;
    let hashes: Vec<Option<String>> = args.inputs.iter().map(|p| sidecar_env_hash(p)).collect();
    let shared = match hashes.first() {
        Some(Some(h)) if hashes.iter().all(|other| other.as_ref() == Some(h)) => Some(h.clone()),
        _ => None,
    };
    write_metrics_csv(create(&args.out)?, &metrics).map_err(|e| located(&args.out, e))?;
    let inputs: Vec<String> = args.inputs.iter().map(|p| p.display().to_string()).collect();
    write_meta(
        &args.out,
        "curves",
        shared.as_deref(),
        json!({ "batch_size": args.batch_size, "replications": args.inputs.len(), "inputs": inputs }),
    )
}

pub fn diagnose(args: DiagnoseArgs) -> Result<(), CliError> {
    let env = load_env(&args.env)?;
    let hash = env_hash(&env);
    let policy = load_policy(&args.policy, &env, &hash)?;
    let start = parse_state(&env, &args.start)?;
    let k_max = args.k_max.unwrap_or(env.horizon());
    let law = interjump_pmf(&env, &policy, start, k_max)?;
    let verdict = match geometric_consistency(&law.pmf) {
        Ok(GeometricVerdict::Consistent { p }) => json!({ "kind": "consistent", "p": p }),
        Ok(GeometricVerdict::ConsistentDegenerate { p }) => json!({ "kind": "consistent-degenerate", "p": p }),
        Ok(GeometricVerdict::Inconsistent { index, expected, observed }) => {
            json!({ "kind": "inconsistent", "index": index, "expected": expected, "observed": observed })
        }
        Err(e) => json!({ "kind": "undetermined", "reason": e.to_string() }),
    };
    let report = json!({
        "tool_version": TOOL_VERSION,
        "env_hash": hash,
        "policy_hash": policy_hash(&policy),
        "start_state": env.state_names()[start],
        "k_max": k_max,
        "pmf": law.pmf,
        "beyond": law.beyond,
        "verdict": verdict,
    });
    let mut text = serde_json::to_string_pretty(&report).expect("plain data");
    text.push('\n');
    match &args.out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
