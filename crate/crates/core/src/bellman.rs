//! Backward induction over the extended state space.
//!
//! `L_n v(x, t, a) = r_n(x, t, a) + sum_{y != x} v(y, 0) p(y | x, t, a)
//!                  + v(x, t + 1) p(x | x, t, a)`
//!
//! The optimal values are `v_N = g_N`, `v_n = max_a L_n v_{n+1}`; the value
//! of a fixed policy replaces the max by the policy's action.

use crate::env::{EnvSpec, ExtendedState};
use crate::error::{Result, SmdpError};
use crate::reachable::ReachableSet;
use crate::sojourn::sojourn_of_path;
use crate::tables::{argmax_lowest, Policy, QTable, StageView, ValueTable};
use crate::validate::validate_env;

/// Largest number of paths [`brute_force_value`] will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Applies `L_n` to the stage-`(n + 1)` values `next` at `(s, a)`.
pub fn apply_l(env: &EnvSpec, n: usize, next: StageView<'_>, s: ExtendedState, a: usize) -> Result<f64> {
    // stage_reward checks the stage and the admissibility of `a`
    let reward = env.stage_reward(n, s, a)?;
    let missing = |cell: ExtendedState| SmdpError::Unreachable { n: next.stage(), x: cell.x, t: cell.t };
    let stay = env.stay_prob(s.x, s.t, a);
    let mut total = reward;
    if stay != 1.0 {
        for (y, &q) in env.jump_probs(s.x, s.t, a).iter().enumerate() {
            if y == s.x || q == 0.0 {
                continue;
            }
            let cell = ExtendedState::new(y, 0);
            total += next.get(cell).ok_or_else(|| missing(cell))? * ((1.0 - stay) * q);
        }
    }
    if stay != 0.0 {
        let cell = s.aged();
        total += next.get(cell).ok_or_else(|| missing(cell))? * stay;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellmanSolution {
    pub values: ValueTable,
    pub q: QTable,
    pub policy: Policy,
}

/// Solves the Bellman equation by a single backward sweep. Ties in the
/// argmax go to the lowest action index.
pub fn solve_bellman(env: &EnvSpec) -> Result<BellmanSolution> {
    let report = validate_env(env);
    if !report.is_empty() {
        return Err(SmdpError::InvalidEnv(report));
    }
    let horizon = env.horizon();
    let layout = ReachableSet::new(env.n_states(), env.n_actions(), horizon);
    let mut values = terminal_values(env);
    let mut q = QTable::filled(layout, f64::NAN);
    for (x, t) in layout.stage_states(horizon) {
        let s = ExtendedState::new(x, t);
        for &a in env.admissible(x, t) {
            q.set(horizon, s, a, env.terminal_reward(s));
        }
    }
    let mut policy_stages = vec![Vec::new(); horizon];
    for n in (0..horizon).rev() {
        let mut stage_v = Vec::with_capacity(layout.stage_len(n) / env.n_actions());
        for (x, t) in layout.stage_states(n) {
            let s = ExtendedState::new(x, t);
            let next = values.stage(n + 1);
            let mut scored = Vec::with_capacity(env.n_actions());
            for &a in env.admissible(x, t) {
                let value = apply_l(env, n, next, s, a)?;
                scored.push((a, value));
            }
            for &(a, value) in &scored {
                q.set(n, s, a, value);
            }
            let (best_a, best_v) = argmax_lowest(scored.into_iter());
            stage_v.push((s, best_v));
            policy_stages[n].push(best_a);
        }
        for (s, v) in stage_v {
            values.set(n, s, v);
        }
    }
    let policy = Policy::from_stages(env.n_states(), policy_stages)?;
    Ok(BellmanSolution { values, q, policy })
}

fn terminal_values(env: &EnvSpec) -> ValueTable {
    let horizon = env.horizon();
    let mut values = ValueTable::filled(env.n_states(), horizon, f64::NAN);
    for x in 0..env.n_states() {
        for t in 0..=horizon {
            let s = ExtendedState::new(x, t);
            values.set(horizon, s, env.terminal_reward(s));
        }
    }
    values
}

/// Values of a fixed policy by the reward iteration
/// `V_{n, pi} = T_{n, pi_n} V_{n+1, pi}`, `V_{N, pi} = g_N`.
pub fn policy_evaluate(env: &EnvSpec, policy: &Policy) -> Result<ValueTable> {
    policy.check(env)?;
    let horizon = env.horizon();
    let layout = ReachableSet::new(env.n_states(), 1, horizon);
    let mut values = terminal_values(env);
    for n in (0..horizon).rev() {
        let mut stage_v = Vec::with_capacity(layout.stage_len(n));
        for (x, t) in layout.stage_states(n) {
            let s = ExtendedState::new(x, t);
            let a = policy.get(n, s)?;
            stage_v.push((s, apply_l(env, n, values.stage(n + 1), s, a)?));
        }
        for (s, v) in stage_v {
            values.set(n, s, v);
        }
    }
    Ok(values)
}

/// Expected total reward of `policy` from `start` at stage 0, by summing
/// over every state path.
pub fn brute_force_value(env: &EnvSpec, policy: &Policy, start: ExtendedState) -> Result<f64> {
    brute_force_value_at(env, policy, 0, start)
}

/// Same as [`brute_force_value`] from `start` at stage `stage`. Ages along
/// each path come from the path's own sojourn sequence, shifted by the
/// starting age while the initial run lasts.
pub fn brute_force_value_at(env: &EnvSpec, policy: &Policy, stage: usize, start: ExtendedState) -> Result<f64> {
    let horizon = env.horizon();
    if stage > horizon {
        return Err(SmdpError::StageOutOfRange { n: stage, horizon });
    }
    if start.x >= env.n_states() {
        return Err(SmdpError::UnknownState(start.x));
    }
    let steps = horizon - stage;
    let paths = (env.n_states() as f64).powi(steps as i32);
    if paths > BRUTE_FORCE_LIMIT {
        return Err(SmdpError::EnumerationTooLarge { paths, limit: BRUTE_FORCE_LIMIT });
    }
    let mut tail = vec![0usize; steps];
    let mut path = Vec::with_capacity(steps + 1);
    let mut total = 0.0;
    loop {
        path.clear();
        path.push(start.x);
        path.extend_from_slice(&tail);
        let mut ages = sojourn_of_path(&path);
        let initial_run = ages.iter().skip(1).take_while(|&&g| g != 0).count() + 1;
        for age in &mut ages[..initial_run] {
            *age += start.t;
        }
        let mut prob = 1.0;
        let mut reward = 0.0;
        for k in 0..steps {
            let s = ExtendedState::new(path[k], ages[k]);
            let a = policy.get(stage + k, s)?;
            if !env.is_admissible(s.x, s.t, a) {
                return Err(SmdpError::InadmissiblePolicy { n: stage + k, x: s.x, t: s.t });
            }
            prob *= env.next_state_prob_raw(path[k + 1], s.x, s.t, a);
            if prob == 0.0 {
                break;
            }
            reward += env.stage_reward_raw(stage + k, s, a);
        }
        if prob != 0.0 {
            reward += env.terminal_reward(ExtendedState::new(path[steps], ages[steps]));
            total += prob * reward;
        }
        // odometer over E^steps
        let mut i = steps;
        loop {
            if i == 0 {
                return Ok(total);
            }
            i -= 1;
            tail[i] += 1;
            if tail[i] < env.n_states() {
                break;
            }
            tail[i] = 0;
        }
    }
}

/// Stage-wise argmax of `q` over the admissible sets, lowest index on ties.
pub fn greedy_policy(q: &QTable, env: &EnvSpec) -> Result<Policy> {
    if q.horizon() != env.horizon() || q.n_states() != env.n_states() || q.n_actions() != env.n_actions() {
        return Err(SmdpError::ShapeMismatch("Q-table does not match the environment".into()));
    }
    Policy::from_fn(env, |n, s| q.best(n, s, env.admissible(s.x, s.t)).0)
}
