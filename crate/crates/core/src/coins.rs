//! The switching uneven coins game.
//!
//! State 0 is tails, state 1 is heads. Each action picks a coin with heads
//! probability `p_i`. Tails pays +1 until the run of tails has lasted more
//! than `t_cheat` steps, after which it pays `r_cheat`; heads pays -1.

use crate::env::{EnvBuilder, EnvSpec, Reward, StateReward, Terminal};
use crate::error::{Result, SmdpError};

pub const TAILS: usize = 0;
pub const HEADS: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CoinsParams {
    pub p: Vec<f64>,
    pub t_cheat: usize,
    pub r_cheat: f64,
    pub horizon: usize,
}

impl CoinsParams {
    pub fn new(p: Vec<f64>, t_cheat: usize, r_cheat: f64, horizon: usize) -> Self {
        Self { p, t_cheat, r_cheat, horizon }
    }

    /// Two coins `p = (1/5, 4/5)`, `t_cheat = 3`, `r_cheat = -10`, `N = 200`.
    pub fn standard() -> Self {
        Self::new(vec![0.2, 0.8], 3, -10.0, 200)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }
}

pub fn build_coins_env(params: &CoinsParams) -> Result<EnvSpec> {
    if params.p.is_empty() {
        return Err(SmdpError::InvalidConfig("coins env needs at least one coin".into()));
    }
    if let Some(p) = params.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(SmdpError::InvalidConfig(format!("coin probability {p} outside [0, 1]")));
    }
    let actions = (1..=params.p.len()).map(|i| format!("a{i}"));
    let mut builder = EnvBuilder::new(["tails", "heads"], actions, params.horizon);
    for (a, &p) in params.p.iter().enumerate() {
        builder = builder
            .stay(TAILS, a, vec![1.0 - p])
            .jump(TAILS, a, vec![0.0, 1.0])
            .stay(HEADS, a, vec![p])
            .jump(HEADS, a, vec![1.0, 0.0]);
    }
    builder
        .reward(Reward::CurrentState(StateReward::Coins {
            p: params.p.clone(),
            t_cheat: params.t_cheat,
            r_cheat: params.r_cheat,
        }))
        .terminal(Terminal::SameAsReward)
        .build()
}
