//! Finite-horizon tabular Q-learning over the reachable extended states.
//!
//! Each episode samples a full trajectory with an epsilon-greedy behavior
//! policy, then sweeps back from stage `N - 1` to 0, moving each visited
//! cell towards `r_n(x, t, a) + max_b Q_{n+1}(X_{n+1}, gamma_{n+1}, b)`.
//! The stage-`N` slice stays equal to `g_N`.

use rand::Rng;

use crate::env::{EnvSpec, ExtendedState};
use crate::error::{Result, SmdpError};
use crate::rng::{RngKey, StepRng, INIT_STREAM};
use crate::simulate::sample_next;
use crate::tables::QTable;
use crate::validate::validate_env;

#[derive(Debug, Clone, PartialEq)]
pub enum LearningSchedule {
    Constant(f64),
    /// `1 / (ceil((m + 1) / 100) + 1)`.
    PaperStep,
    /// Explicit per-episode rates; the final entry is reused.
    Custom(Vec<f64>),
}

impl LearningSchedule {
    pub fn lr(&self, m: usize) -> f64 {
        match self {
            LearningSchedule::Constant(alpha) => *alpha,
            LearningSchedule::PaperStep => 1.0 / ((m + 1).div_ceil(100) + 1) as f64,
            LearningSchedule::Custom(table) => table.get(m).or(table.last()).copied().unwrap_or(0.0),
        }
    }

    /// Rates must lie in `[0, 1]`; the end points are allowed as degenerate
    /// cases (no learning, full replacement).
    pub fn validate(&self) -> Result<()> {
        let bad = |a: f64| !(0.0..=1.0).contains(&a);
        match self {
            LearningSchedule::Constant(a) if bad(*a) => {
                Err(SmdpError::InvalidConfig(format!("learning rate {a} outside [0, 1]")))
            }
            LearningSchedule::Custom(t) if t.is_empty() => Err(SmdpError::InvalidConfig("empty rate table".into())),
            LearningSchedule::Custom(t) if t.iter().any(|&a| bad(a)) => {
                Err(SmdpError::InvalidConfig("rate table has entries outside [0, 1]".into()))
            }
            _ => Ok(()),
        }
    }

    /// Constant rate strictly inside `(0, 1)`, where the sup error has a
    /// limiting bound proportional to the rate.
    pub fn is_constant_regime(&self) -> bool {
        matches!(self, LearningSchedule::Constant(a) if *a > 0.0 && *a < 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QInit {
    /// Independent uniform draws in `[lo, hi)` per decision cell.
    Uniform { lo: f64, hi: f64 },
    Constant(f64),
    /// Start from a given table (its boundary is reset to `g_N`).
    Table(QTable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartRule {
    Fixed(usize),
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub schedule: LearningSchedule,
    pub epsilon: f64,
    pub q_init: QInit,
    pub start: StartRule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            schedule: LearningSchedule::Constant(0.3),
            epsilon: 0.0,
            q_init: QInit::Uniform { lo: 0.0, hi: 1.0 },
            start: StartRule::Uniform,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(SmdpError::InvalidConfig(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        match &self.q_init {
            QInit::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                Err(SmdpError::InvalidConfig(format!("bad init bounds [{lo}, {hi})")))
            }
            QInit::Constant(c) if !c.is_finite() => Err(SmdpError::InvalidConfig("non-finite init".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub q: QTable,
    /// Per-episode total reward, terminal included.
    pub rewards: Vec<f64>,
    /// Per-episode sup-norm error against the reference, after the update.
    pub errors: Option<Vec<f64>>,
}

/// `max |q - reference|` over every reachable cell, stage `N` included.
/// Inadmissible cells (NaN in both tables) are skipped.
pub fn sup_error(q: &QTable, reference: &QTable) -> Result<f64> {
    if q.layout() != reference.layout() {
        return Err(SmdpError::ShapeMismatch(format!(
            "tables cover horizons {} and {} over {}x{} and {}x{} cells",
            q.horizon(),
            reference.horizon(),
            q.n_states(),
            q.n_actions(),
            reference.n_states(),
            reference.n_actions()
        )));
    }
    let mut worst: f64 = 0.0;
    for (a, b) in q.values().iter().zip(reference.values()) {
        match (a.is_nan(), b.is_nan()) {
            (true, true) => continue,
            (false, false) => worst = worst.max((a - b).abs()),
            _ => return Err(SmdpError::ShapeMismatch("admissible cells differ".into())),
        }
    }
    Ok(worst)
}

fn initial_table(env: &EnvSpec, config: &TrainConfig) -> Result<QTable> {
    match &config.q_init {
        QInit::Constant(c) => Ok(QTable::from_fn(env, |_, _, _| *c)),
        QInit::Uniform { lo, hi } => {
            let mut rng = StepRng::new(RngKey::new(config.seed, INIT_STREAM)).sequential();
            let (lo, hi) = (*lo, *hi);
            Ok(QTable::from_fn(env, |_, _, _| if lo == hi { lo } else { rng.random_range(lo..hi) }))
        }
        QInit::Table(table) => {
            let fresh = QTable::from_fn(env, |_, _, _| 0.0);
            if fresh.layout() != table.layout() {
                return Err(SmdpError::ShapeMismatch("initial Q-table does not match the environment".into()));
            }
            Ok(QTable::from_fn(env, |n, s, a| table.get(n, s, a).unwrap_or(f64::NAN)))
        }
    }
}

/// Trains a Q-table for `config.episodes` episodes. If `reference` is given
/// the sup error against it is recorded after every episode.
pub fn train(env: &EnvSpec, config: &TrainConfig, reference: Option<&QTable>) -> Result<TrainResult> {
    let report = validate_env(env);
    if !report.is_empty() {
        return Err(SmdpError::InvalidEnv(report));
    }
    config.validate()?;
    if let StartRule::Fixed(x) = config.start {
        if x >= env.n_states() {
            return Err(SmdpError::UnknownState(x));
        }
    }
    let mut q = initial_table(env, config)?;
    if let Some(reference) = reference {
        if reference.horizon() != env.horizon() {
            return Err(SmdpError::ShapeMismatch(format!(
                "reference horizon {} differs from env horizon {}",
                reference.horizon(),
                env.horizon()
            )));
        }
        sup_error(&q, reference)?;
    }
    let horizon = env.horizon();
    let mut rewards = Vec::with_capacity(config.episodes);
    let mut errors = reference.map(|_| Vec::with_capacity(config.episodes));
    let mut visited: Vec<(ExtendedState, usize)> = Vec::with_capacity(horizon);
    for m in 0..config.episodes {
        let mut stream = StepRng::new(RngKey::new(config.seed, m as u64));
        let start_x = match config.start {
            StartRule::Fixed(x) => x,
            StartRule::Uniform => stream.at_step(0).random_range(0..env.n_states()),
        };
        let mut s = ExtendedState::new(start_x, 0);
        let mut total = 0.0;
        visited.clear();
        for n in 0..horizon {
            let rng = stream.at_step(n as u64 + 1);
            let d = env.admissible(s.x, s.t);
            let explore: f64 = rng.random();
            let a = if explore < config.epsilon {
                d[rng.random_range(0..d.len())]
            } else {
                q.best(n, s, d).0
            };
            let next = sample_next(env, s, a, rng);
            total += env.realized_reward(n, s, a, next.x);
            visited.push((s, a));
            s = next;
        }
        total += env.terminal_reward(s);
        rewards.push(total);

        let alpha = config.schedule.lr(m);
        let mut successor = s;
        for n in (0..horizon).rev() {
            let (cell, a) = visited[n];
            let best_next = q.best(n + 1, successor, env.admissible(successor.x, successor.t)).1;
            let target = env.stage_reward_raw(n, cell, a) + best_next;
            let i = q.index(n, cell, a);
            let updated = (1.0 - alpha) * q.at(i) + alpha * target;
            *q.at_mut(i) = updated;
            successor = cell;
        }
        if let (Some(errors), Some(reference)) = (errors.as_mut(), reference) {
            errors.push(sup_error(&q, reference)?);
        }
    }
    Ok(TrainResult { q, rewards, errors })
}
