#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smdp_core::env::{EnvBuilder, NextStateReward, Reward, StateReward, Terminal};
use smdp_core::EnvSpec;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_horizon: usize,
    /// Restrict some admissible sets.
    pub restrict_actions: bool,
    /// Allow expected-next-state rewards.
    pub next_state_rewards: bool,
}

pub const SMALL: Limits =
    Limits { max_states: 3, max_actions: 2, max_horizon: 6, restrict_actions: true, next_state_rewards: true };

fn probability<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..8) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random(),
    }
}

/// Destination law over `y != x`, normalized by construction.
fn destination_law<R: Rng>(rng: &mut R, n_states: usize, x: usize) -> Vec<f64> {
    let mut row = vec![0.0; n_states];
    if n_states == 1 {
        return row;
    }
    let others: Vec<usize> = (0..n_states).filter(|&y| y != x).collect();
    if rng.random_bool(0.3) {
        row[others[rng.random_range(0..others.len())]] = 1.0;
        return row;
    }
    let weights: Vec<f64> = others.iter().map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, &y) in others.iter().enumerate() {
        // last entry absorbs the rounding so the row sums to 1 within an ulp
        row[y] = if i + 1 == others.len() { 1.0 - acc } else { weights[i] / total };
        acc += row[y];
    }
    row
}

fn reward_rows<R: Rng>(rng: &mut R, n_states: usize, horizon: usize) -> Vec<Vec<f64>> {
    (0..n_states)
        .map(|_| (0..rng.random_range(1..=horizon + 1)).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Random valid environment within `limits`.
pub fn random_env<R: Rng>(rng: &mut R, limits: Limits) -> EnvSpec {
    let n_states = rng.random_range(1..=limits.max_states);
    let n_actions = rng.random_range(1..=limits.max_actions);
    let horizon = rng.random_range(1..=limits.max_horizon);
    random_env_with(rng, n_states, n_actions, horizon, limits)
}

pub fn random_env_with<R: Rng>(
    rng: &mut R,
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    limits: Limits,
) -> EnvSpec {
    let mut b = EnvBuilder::with_sizes(n_states, n_actions, horizon);
    for x in 0..n_states {
        for a in 0..n_actions {
            let ages = rng.random_range(1..=horizon);
            let stay: Vec<f64> = (0..ages).map(|_| if n_states == 1 { 1.0 } else { probability(rng) }).collect();
            let jump_ages = rng.random_range(1..=horizon);
            let jump = (0..jump_ages).map(|_| destination_law(rng, n_states, x)).collect();
            b = b.stay(x, a, stay).jump_by_age(x, a, jump);
        }
        if limits.restrict_actions && n_actions > 1 && rng.random_bool(0.4) {
            let by_age = (0..rng.random_range(1..=horizon))
                .map(|_| {
                    let set: Vec<usize> = (0..n_actions).filter(|_| rng.random_bool(0.6)).collect();
                    if set.is_empty() {
                        vec![rng.random_range(0..n_actions)]
                    } else {
                        set
                    }
                })
                .collect();
            b = b.admissible(x, by_age);
        }
    }
    let reward = if limits.next_state_rewards && rng.random_bool(0.3) {
        let stages = (0..rng.random_range(1..=horizon))
            .map(|_| {
                (0..n_states)
                    .map(|_| {
                        (0..rng.random_range(1..=horizon))
                            .map(|_| (0..n_actions * n_states).map(|_| rng.random_range(-1.0..1.0)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Reward::ExpectedNextState(NextStateReward { stages })
    } else {
        Reward::CurrentState(StateReward::Table(reward_rows(rng, n_states, horizon)))
    };
    let terminal = match (&reward, rng.random_bool(0.3)) {
        (Reward::CurrentState(_), true) => Terminal::SameAsReward,
        _ => Terminal::Table(reward_rows(rng, n_states, horizon)),
    };
    b.reward(reward).terminal(terminal).build().expect("generated env is valid")
}
