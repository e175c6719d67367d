//! Episode sampling from the extended-state kernel.

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::env::{EnvSpec, ExtendedState};
use crate::error::{Result, SmdpError};
use crate::rng::{RngKey, StepRng};
use crate::tables::Policy;

/// Chooses the action at stage `n` in extended state `s`.
pub trait ActionSource {
    fn choose(&mut self, n: usize, s: ExtendedState, rng: &mut dyn RngCore) -> Result<usize>;
}

impl ActionSource for Policy {
    fn choose(&mut self, n: usize, s: ExtendedState, _rng: &mut dyn RngCore) -> Result<usize> {
        self.get(n, s)
    }
}

impl ActionSource for &Policy {
    fn choose(&mut self, n: usize, s: ExtendedState, _rng: &mut dyn RngCore) -> Result<usize> {
        self.get(n, s)
    }
}

/// Adapts a closure `(n, s, rng) -> a` into an [`ActionSource`].
pub struct FnSource<F>(pub F);

impl<F> ActionSource for FnSource<F>
where
    F: FnMut(usize, ExtendedState, &mut dyn RngCore) -> usize,
{
    fn choose(&mut self, n: usize, s: ExtendedState, rng: &mut dyn RngCore) -> Result<usize> {
        Ok((self.0)(n, s, rng))
    }
}

/// Uniformly random admissible action at every step.
pub fn uniform_source(env: &EnvSpec) -> FnSource<impl FnMut(usize, ExtendedState, &mut dyn RngCore) -> usize + '_> {
    FnSource(move |_n, s: ExtendedState, rng: &mut dyn RngCore| {
        let d = env.admissible(s.x, s.t);
        d[rng.random_range(0..d.len())]
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub n: usize,
    pub x: usize,
    pub t: usize,
    pub a: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub key: RngKey,
    pub start: ExtendedState,
    pub steps: Vec<Step>,
    pub final_state: ExtendedState,
    /// Step rewards plus the terminal reward of the final state.
    pub total_reward: f64,
}

impl EpisodeTrace {
    /// `(X_n, gamma_n)` for `n = 0..=N`.
    pub fn states(&self) -> Vec<ExtendedState> {
        self.steps
            .iter()
            .map(|s| ExtendedState::new(s.x, s.t))
            .chain(std::iter::once(self.final_state))
            .collect()
    }
}

/// Samples the successor of `(s, a)`: one uniform decides stay versus jump,
/// a second picks the jump destination.
pub fn sample_next<R: Rng + ?Sized>(env: &EnvSpec, s: ExtendedState, a: usize, rng: &mut R) -> ExtendedState {
    let stay = env.stay_prob(s.x, s.t, a);
    let u: f64 = rng.random();
    if u < stay {
        return s.aged();
    }
    let dest = env.jump_probs(s.x, s.t, a);
    let v: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = s.x;
    for (y, &q) in dest.iter().enumerate() {
        if y == s.x || q == 0.0 {
            continue;
        }
        acc += q;
        last = y;
        if v < acc {
            return ExtendedState::new(y, 0);
        }
    }
    // rounding left v above the accumulated mass
    ExtendedState::new(last, 0)
}

/// Runs one episode of `N` transitions from `(start_x, 0)`. Step `n` draws
/// from block `n` of the stream `key`.
pub fn run_episode<S: ActionSource + ?Sized>(
    env: &EnvSpec,
    source: &mut S,
    start_x: usize,
    key: RngKey,
) -> Result<EpisodeTrace> {
    if start_x >= env.n_states() {
        return Err(SmdpError::UnknownState(start_x));
    }
    let mut stream = StepRng::new(key);
    let start = ExtendedState::new(start_x, 0);
    let mut s = start;
    let mut steps = Vec::with_capacity(env.horizon());
    let mut total = 0.0;
    for n in 0..env.horizon() {
        let rng = stream.at_step(n as u64);
        let a = source.choose(n, s, rng)?;
        if !env.is_admissible(s.x, s.t, a) {
            return Err(SmdpError::InadmissibleAction { x: s.x, t: s.t, a });
        }
        let next = sample_next(env, s, a, rng);
        let reward = env.realized_reward(n, s, a, next.x);
        total += reward;
        steps.push(Step { n, x: s.x, t: s.t, a, reward });
        s = next;
    }
    total += env.terminal_reward(s);
    Ok(EpisodeTrace { key, start, steps, final_state: s, total_reward: total })
}

/// Uniform start state for the episode keyed by `key`, drawn from block
/// `N` of its stream, which [`run_episode`] never reads.
pub fn uniform_start(env: &EnvSpec, key: RngKey) -> usize {
    StepRng::new(key).at_step(env.horizon() as u64).random_range(0..env.n_states())
}

/// Runs episodes `0..count` of `seed` under a fixed policy in parallel.
/// `start_x(i)` picks the start state of episode `i`.
pub fn run_episodes(
    env: &EnvSpec,
    policy: &Policy,
    seed: u64,
    count: u64,
    start_x: impl Fn(u64) -> usize + Sync,
) -> Result<Vec<EpisodeTrace>> {
    (0..count)
        .into_par_iter()
        .map(|i| run_episode(env, &mut &*policy, start_x(i), RngKey::new(seed, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coins::{build_coins_env, CoinsParams};
    use crate::env::{EnvBuilder, Reward, StateReward};
    use crate::sojourn::sojourn_of_path;

    fn structural_rule_holds(trace: &EpisodeTrace) -> bool {
        trace.states().windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            (a.x == b.x && b.t == a.t + 1) || (a.x != b.x && b.t == 0)
        })
    }

    #[test]
    fn deterministic_env_ages_linearly() {
        let env = EnvBuilder::with_sizes(2, 1, 6)
            .stay(0, 0, vec![1.0])
            .stay(1, 0, vec![1.0])
            .jump(0, 0, vec![0.0, 1.0])
            .jump(1, 0, vec![1.0, 0.0])
            .build()
            .unwrap();
        let policy = Policy::constant(&env, 0).unwrap();
        let trace = run_episode(&env, &mut &policy, 1, RngKey::new(5, 0)).unwrap();
        let states = trace.states();
        assert_eq!(states.len(), 7);
        for (n, s) in states.iter().enumerate() {
            assert_eq!(*s, ExtendedState::new(1, n));
        }
    }

    #[test]
    fn coins_traces_are_structural_and_bounded() {
        let env = build_coins_env(&CoinsParams::standard()).unwrap();
        for episode in 0..50 {
            let mut source = uniform_source(&env);
            let trace = run_episode(&env, &mut source, (episode % 2) as usize, RngKey::new(17, episode)).unwrap();
            assert!(structural_rule_holds(&trace));
            let states = trace.states();
            assert!(states.iter().enumerate().all(|(n, s)| s.t <= n));
            let xs: Vec<usize> = states.iter().map(|s| s.x).collect();
            let ts: Vec<usize> = states.iter().map(|s| s.t).collect();
            assert_eq!(sojourn_of_path(&xs), ts);
            let sum: f64 = trace.steps.iter().map(|s| s.reward).sum::<f64>() + env.terminal_reward(trace.final_state);
            assert_eq!(sum, trace.total_reward);
        }
    }

    #[test]
    fn total_reward_is_sum_over_visited_states() {
        let env = build_coins_env(&CoinsParams::new(vec![0.2, 0.8], 3, -10.0, 30)).unwrap();
        let policy = Policy::constant(&env, 0).unwrap();
        let trace = run_episode(&env, &mut &policy, 0, RngKey::new(3, 9)).unwrap();
        let expected: f64 = trace.states().iter().map(|&s| env.terminal_reward(s)).sum();
        assert_eq!(trace.total_reward, expected);
    }

    #[test]
    fn same_key_same_trace() {
        let env = build_coins_env(&CoinsParams::standard()).unwrap();
        let a = run_episode(&env, &mut uniform_source(&env), 0, RngKey::new(42, 7)).unwrap();
        let b = run_episode(&env, &mut uniform_source(&env), 0, RngKey::new(42, 7)).unwrap();
        assert_eq!(a, b);
        let c = run_episode(&env, &mut uniform_source(&env), 0, RngKey::new(42, 8)).unwrap();
        assert_ne!(a.steps, c.steps);
    }

    #[test]
    fn parallel_runs_match_sequential() {
        let env = build_coins_env(&CoinsParams::new(vec![0.3, 0.6], 2, -5.0, 20)).unwrap();
        let policy = Policy::constant(&env, 1).unwrap();
        let par = run_episodes(&env, &policy, 9, 64, |i| (i % 2) as usize).unwrap();
        for (i, trace) in par.iter().enumerate() {
            let seq = run_episode(&env, &mut &policy, i % 2, RngKey::new(9, i as u64)).unwrap();
            assert_eq!(*trace, seq);
        }
    }

    #[test]
    fn inadmissible_callback_is_rejected() {
        let env = build_coins_env(&CoinsParams::new(vec![0.3], 2, -5.0, 5)).unwrap();
        let mut bad = FnSource(|_, _, _: &mut dyn RngCore| 3);
        assert!(matches!(
            run_episode(&env, &mut bad, 0, RngKey::new(0, 0)),
            Err(SmdpError::InadmissibleAction { x: 0, t: 0, a: 3 })
        ));
    }

    #[test]
    fn three_state_jumps_follow_destination_law() {
        let env = EnvBuilder::with_sizes(3, 1, 1)
            .stay(0, 0, vec![0.0])
            .stay(1, 0, vec![1.0])
            .stay(2, 0, vec![1.0])
            .jump(0, 0, vec![0.0, 0.25, 0.75])
            .jump(1, 0, vec![0.5, 0.0, 0.5])
            .jump(2, 0, vec![0.5, 0.5, 0.0])
            .reward(Reward::CurrentState(StateReward::Table(vec![vec![0.0]; 3])))
            .build()
            .unwrap();
        let policy = Policy::constant(&env, 0).unwrap();
        let traces = run_episodes(&env, &policy, 1, 20_000, |_| 0).unwrap();
        let to_two = traces.iter().filter(|t| t.final_state == ExtendedState::new(2, 0)).count() as f64;
        let frac = to_two / 20_000.0;
        // 0.75 +- 5 standard errors
        assert!((frac - 0.75).abs() < 5.0 * (0.75f64 * 0.25 / 20_000.0).sqrt(), "{frac}");
    }
}
