//! Finite environments over the extended state space `E x N0`.
//!
//! The kernel is stored in stay/jump form: from `(x, t)` under action `a`
//! the process either stays in `x` and ages to `t + 1`, or jumps to some
//! `y != x` and restarts at age 0. Any kernel written this way satisfies
//! the structural constraints `P(x, s | x, t, a) = 0` for `s != t + 1` and
//! `P(y, s | x, t, a) = 0` for `y != x, s != 0`, apart from mass placed on
//! the diagonal of a jump vector, which validation rejects.
//!
//! Per-age arrays (stay probabilities, reward rows, admissible sets) reuse
//! their final entry for ages beyond their length, so time-homogeneous
//! kernels take a single entry.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Result, SmdpError};
use crate::validate::{validate_env, ValidationReport};

/// A state paired with its sojourn age.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExtendedState {
    pub x: usize,
    pub t: usize,
}

impl ExtendedState {
    pub const fn new(x: usize, t: usize) -> Self {
        Self { x, t }
    }

    /// The cell reached by staying in the current state.
    pub const fn aged(self) -> Self {
        Self { x: self.x, t: self.t + 1 }
    }
}

impl fmt::Display for ExtendedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    CurrentState,
    ExpectedNextState,
}

/// A reward `r(x, t)` read at the current extended state.
#[derive(Debug, Clone, PartialEq)]
pub enum StateReward {
    /// `table[x][t]`, last entry of each row reused.
    Table(Vec<Vec<f64>>),
    /// +1 on tails up to `t_cheat`, `r_cheat` on longer tails runs, -1 on heads.
    /// `p` records the coin parameters the rule was written for.
    Coins { p: Vec<f64>, t_cheat: usize, r_cheat: f64 },
}

impl StateReward {
    pub fn value(&self, x: usize, t: usize) -> f64 {
        match self {
            StateReward::Table(rows) => rows.get(x).map_or(f64::NAN, |row| by_age(row, t)),
            StateReward::Coins { t_cheat, r_cheat, .. } => match x {
                0 if t <= *t_cheat => 1.0,
                0 => *r_cheat,
                _ => -1.0,
            },
        }
    }
}

/// Full next-state reward tables `rbar_n(x' | y, t, a)`.
///
/// Indexed `stages[n][y][t][a * |E| + x']`; the stage list and each age list
/// reuse their final entry.
#[derive(Debug, Clone, PartialEq)]
pub struct NextStateReward {
    pub stages: Vec<Vec<Vec<Vec<f64>>>>,
}

impl NextStateReward {
    pub fn value(&self, n: usize, y: usize, t: usize, a: usize, dest: usize, n_states: usize) -> f64 {
        let Some(stage) = by_age_ref(&self.stages, n) else {
            return f64::NAN;
        };
        let Some(ages) = stage.get(y) else {
            return f64::NAN;
        };
        by_age_ref(ages, t)
            .and_then(|row| row.get(a * n_states + dest))
            .copied()
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reward {
    CurrentState(StateReward),
    ExpectedNextState(NextStateReward),
}

impl Reward {
    pub fn kind(&self) -> RewardKind {
        match self {
            Reward::CurrentState(_) => RewardKind::CurrentState,
            Reward::ExpectedNextState(_) => RewardKind::ExpectedNextState,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Terminal {
    /// `g_N := r`, only meaningful for current-state rewards.
    SameAsReward,
    /// `table[x][t]`, last entry reused.
    Table(Vec<Vec<f64>>),
}

/// Stay/jump kernel, indexed by `x * |A| + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    /// Probability of staying, per age.
    pub stay: Vec<Vec<f64>>,
    /// Destination distribution given a jump, per age, each of length `|E|`.
    pub jump: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    states: Vec<String>,
    actions: Vec<String>,
    horizon: usize,
    /// `admissible[x][t]`; `None` means every action everywhere.
    admissible: Option<Vec<Vec<Vec<usize>>>>,
    all_actions: Vec<usize>,
    kernel: Kernel,
    reward: Reward,
    terminal: Terminal,
}

pub(crate) fn by_age(row: &[f64], t: usize) -> f64 {
    match row.last() {
        None => f64::NAN,
        Some(last) => *row.get(t).unwrap_or(last),
    }
}

pub(crate) fn by_age_ref<T>(row: &[T], t: usize) -> Option<&T> {
    row.get(t).or_else(|| row.last())
}

impl EnvSpec {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn reward(&self) -> &Reward {
        &self.reward
    }

    pub fn terminal(&self) -> &Terminal {
        &self.terminal
    }

    pub fn admissible_table(&self) -> Option<&Vec<Vec<Vec<usize>>>> {
        self.admissible.as_ref()
    }

    /// `D(x, t)`, sorted ascending.
    pub fn admissible(&self, x: usize, t: usize) -> &[usize] {
        match &self.admissible {
            None => &self.all_actions,
            Some(table) => table
                .get(x)
                .and_then(|ages| by_age_ref(ages, t))
                .map_or(&[][..], Vec::as_slice),
        }
    }

    pub fn is_admissible(&self, x: usize, t: usize, a: usize) -> bool {
        self.admissible(x, t).binary_search(&a).is_ok()
    }

    fn check_cell(&self, s: ExtendedState, a: usize) -> Result<()> {
        if s.x >= self.n_states() {
            return Err(SmdpError::UnknownState(s.x));
        }
        if a >= self.n_actions() {
            return Err(SmdpError::UnknownAction(a));
        }
        if !self.is_admissible(s.x, s.t, a) {
            return Err(SmdpError::InadmissibleAction { x: s.x, t: s.t, a });
        }
        Ok(())
    }

    /// Stay probability without admissibility checks. NaN if missing.
    pub fn stay_prob(&self, x: usize, t: usize, a: usize) -> f64 {
        self.kernel
            .stay
            .get(x * self.n_actions() + a)
            .map_or(f64::NAN, |row| by_age(row, t))
    }

    /// Conditional destination law given a jump. Empty if missing.
    pub fn jump_probs(&self, x: usize, t: usize, a: usize) -> &[f64] {
        self.kernel
            .jump
            .get(x * self.n_actions() + a)
            .and_then(|ages| by_age_ref(ages, t))
            .map_or(&[][..], Vec::as_slice)
    }

    /// Probability of `p(dest | x, t, a)` without checks.
    pub(crate) fn next_state_prob_raw(&self, dest: usize, x: usize, t: usize, a: usize) -> f64 {
        let stay = self.stay_prob(x, t, a);
        if dest == x {
            stay
        } else {
            (1.0 - stay) * self.jump_probs(x, t, a).get(dest).copied().unwrap_or(0.0)
        }
    }

    /// `P(to | from, a)` under the induced kernel.
    pub fn transition_prob(&self, from: ExtendedState, a: usize, to: ExtendedState) -> Result<f64> {
        self.check_cell(from, a)?;
        if to.x >= self.n_states() {
            return Err(SmdpError::UnknownState(to.x));
        }
        let p = if to.x == from.x {
            if to.t == from.t + 1 {
                self.stay_prob(from.x, from.t, a)
            } else {
                0.0
            }
        } else if to.t == 0 {
            self.next_state_prob_raw(to.x, from.x, from.t, a)
        } else {
            0.0
        };
        Ok(p)
    }

    /// `p(dest | x, t, a)`: the law of the next state ignoring age.
    pub fn state_transition_prob(&self, dest: usize, from: ExtendedState, a: usize) -> Result<f64> {
        self.check_cell(from, a)?;
        if dest >= self.n_states() {
            return Err(SmdpError::UnknownState(dest));
        }
        Ok(self.next_state_prob_raw(dest, from.x, from.t, a))
    }

    /// Successor cells with non-zero probability: the stay cell first, then
    /// jump destinations in ascending state order.
    pub fn successors(&self, s: ExtendedState, a: usize) -> impl Iterator<Item = (ExtendedState, f64)> + '_ {
        let stay = self.stay_prob(s.x, s.t, a);
        let stay_cell = (stay != 0.0).then_some((s.aged(), stay));
        let jumps = self
            .jump_probs(s.x, s.t, a)
            .iter()
            .enumerate()
            .filter(move |&(y, &q)| y != s.x && q != 0.0 && stay != 1.0)
            .map(move |(y, &q)| (ExtendedState::new(y, 0), (1.0 - stay) * q));
        stay_cell.into_iter().chain(jumps)
    }

    /// One-stage expected reward `r_n(x, t, a)`.
    pub fn stage_reward(&self, n: usize, s: ExtendedState, a: usize) -> Result<f64> {
        if n >= self.horizon {
            return Err(SmdpError::StageOutOfRange { n, horizon: self.horizon });
        }
        self.check_cell(s, a)?;
        Ok(self.stage_reward_raw(n, s, a))
    }

    pub(crate) fn stage_reward_raw(&self, n: usize, s: ExtendedState, a: usize) -> f64 {
        match &self.reward {
            Reward::CurrentState(r) => r.value(s.x, s.t),
            Reward::ExpectedNextState(r) => (0..self.n_states())
                .map(|dest| {
                    let p = self.next_state_prob_raw(dest, s.x, s.t, a);
                    if p == 0.0 {
                        0.0
                    } else {
                        r.value(n, s.x, s.t, a, dest, self.n_states()) * p
                    }
                })
                .sum(),
        }
    }

    /// Reward attributed to a realized transition `(x, t) -a-> next_x` at
    /// stage `n`. Equals the stage reward for current-state rewards.
    pub fn realized_reward(&self, n: usize, s: ExtendedState, a: usize, next_x: usize) -> f64 {
        match &self.reward {
            Reward::CurrentState(r) => r.value(s.x, s.t),
            Reward::ExpectedNextState(r) => r.value(n, s.x, s.t, a, next_x, self.n_states()),
        }
    }

    /// Terminal reward `g_N(x, t)`.
    pub fn terminal_reward(&self, s: ExtendedState) -> f64 {
        match (&self.terminal, &self.reward) {
            (Terminal::SameAsReward, Reward::CurrentState(r)) => r.value(s.x, s.t),
            (Terminal::SameAsReward, Reward::ExpectedNextState(_)) => f64::NAN,
            (Terminal::Table(rows), _) => rows.get(s.x).map_or(f64::NAN, |row| by_age(row, s.t)),
        }
    }

    /// Returns a copy of this environment with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self { horizon, ..self.clone() }
    }
}

/// Assembles an [`EnvSpec`]. Unset kernel rows are left empty so that
/// validation reports them.
#[derive(Debug, Clone)]
pub struct EnvBuilder {
    env: EnvSpec,
}

impl EnvBuilder {
    pub fn new<S: Into<String>, A: Into<String>>(
        states: impl IntoIterator<Item = S>,
        actions: impl IntoIterator<Item = A>,
        horizon: usize,
    ) -> Self {
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        let actions: Vec<String> = actions.into_iter().map(Into::into).collect();
        let cells = states.len() * actions.len();
        let n_states = states.len();
        Self {
            env: EnvSpec {
                all_actions: (0..actions.len()).collect(),
                kernel: Kernel { stay: vec![Vec::new(); cells], jump: vec![Vec::new(); cells] },
                reward: Reward::CurrentState(StateReward::Table(vec![vec![0.0]; n_states])),
                terminal: Terminal::Table(vec![vec![0.0]; n_states]),
                admissible: None,
                states,
                actions,
                horizon,
            },
        }
    }

    /// Builder with anonymous names `s0..`, `a0..`.
    pub fn with_sizes(n_states: usize, n_actions: usize, horizon: usize) -> Self {
        Self::new(
            (0..n_states).map(|i| format!("s{i}")),
            (0..n_actions).map(|i| format!("a{i}")),
            horizon,
        )
    }

    fn cell(&self, x: usize, a: usize) -> usize {
        x * self.env.actions.len() + a
    }

    /// Per-age stay probabilities for `(x, a)`.
    pub fn stay(mut self, x: usize, a: usize, by_age: Vec<f64>) -> Self {
        let i = self.cell(x, a);
        self.env.kernel.stay[i] = by_age;
        self
    }

    /// Age-independent destination law given a jump.
    pub fn jump(self, x: usize, a: usize, dest: Vec<f64>) -> Self {
        self.jump_by_age(x, a, vec![dest])
    }

    pub fn jump_by_age(mut self, x: usize, a: usize, by_age: Vec<Vec<f64>>) -> Self {
        let i = self.cell(x, a);
        self.env.kernel.jump[i] = by_age;
        self
    }

    pub fn kernel(mut self, kernel: Kernel) -> Self {
        self.env.kernel = kernel;
        self
    }

    /// Admissible sets for state `x`, one list per age (last reused).
    pub fn admissible(mut self, x: usize, by_age: Vec<Vec<usize>>) -> Self {
        let n_states = self.env.states.len();
        let all = self.env.all_actions.clone();
        let table = self.env.admissible.get_or_insert_with(|| vec![vec![all]; n_states]);
        let mut by_age = by_age;
        for set in &mut by_age {
            set.sort_unstable();
            set.dedup();
        }
        table[x] = by_age;
        self
    }

    pub fn reward(mut self, reward: Reward) -> Self {
        self.env.reward = reward;
        self
    }

    pub fn terminal(mut self, terminal: Terminal) -> Self {
        self.env.terminal = terminal;
        self
    }

    /// Builds and validates.
    pub fn build(self) -> Result<EnvSpec> {
        let report = validate_env(&self.env);
        if report.is_empty() {
            Ok(self.env)
        } else {
            Err(SmdpError::InvalidEnv(report))
        }
    }

    /// Builds without validation; pair with [`validate_env`].
    pub fn build_unchecked(self) -> EnvSpec {
        self.env
    }

    /// Builds, returning the report alongside the environment.
    pub fn build_with_report(self) -> (EnvSpec, ValidationReport) {
        let report = validate_env(&self.env);
        (self.env, report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coins::{build_coins_env, CoinsParams};

    fn coins() -> EnvSpec {
        build_coins_env(&CoinsParams::new(vec![0.2, 0.8], 3, -10.0, 6)).unwrap()
    }

    #[test]
    fn coins_kernel_entries() {
        let env = coins();
        for (a, p) in [(0, 0.2), (1, 0.8)] {
            for t in [0, 3, 5] {
                let from = ExtendedState::new(0, t);
                // the jump mass is computed as 1 - (1 - p)
                assert!((env.transition_prob(from, a, ExtendedState::new(1, 0)).unwrap() - p).abs() < 1e-15);
                assert_eq!(env.transition_prob(from, a, ExtendedState::new(0, t + 2)).unwrap(), 0.0);
                assert_eq!(env.transition_prob(from, a, ExtendedState::new(0, 0)).unwrap(), 0.0);
                assert!((env.state_transition_prob(1, from, a).unwrap() - p).abs() < 1e-15);
                assert_eq!(env.state_transition_prob(0, from, a).unwrap(), 1.0 - p);
                let heads = ExtendedState::new(1, t);
                assert_eq!(env.transition_prob(heads, a, heads.aged()).unwrap(), p);
                assert_eq!(env.transition_prob(heads, a, ExtendedState::new(0, 0)).unwrap(), 1.0 - p);
            }
        }
    }

    #[test]
    fn kernel_normalizes_over_all_cells() {
        let env = coins();
        let from = ExtendedState::new(0, 5);
        for a in 0..2 {
            let total: f64 = (0..2)
                .flat_map(|y| (0..10).map(move |s| ExtendedState::new(y, s)))
                .map(|to| env.transition_prob(from, a, to).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
            let by_state: f64 = (0..2).map(|y| env.state_transition_prob(y, from, a).unwrap()).sum();
            assert!((by_state - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn successors_match_transition_prob() {
        let env = coins();
        let s = ExtendedState::new(1, 2);
        for a in 0..2 {
            for (to, p) in env.successors(s, a) {
                assert_eq!(env.transition_prob(s, a, to).unwrap(), p);
            }
            assert_eq!(env.successors(s, a).count(), 2);
        }
    }

    #[test]
    fn coins_rewards() {
        let env = coins();
        for a in 0..2 {
            assert_eq!(env.stage_reward(0, ExtendedState::new(0, 2), a).unwrap(), 1.0);
            assert_eq!(env.stage_reward(1, ExtendedState::new(1, 7), a).unwrap(), -1.0);
            assert_eq!(env.stage_reward(5, ExtendedState::new(0, 4), a).unwrap(), -10.0);
        }
        assert_eq!(env.terminal_reward(ExtendedState::new(0, 1)), 1.0);
        assert_eq!(env.terminal_reward(ExtendedState::new(1, 0)), -1.0);
        assert!(matches!(
            env.stage_reward(6, ExtendedState::new(0, 0), 0),
            Err(SmdpError::StageOutOfRange { n: 6, horizon: 6 })
        ));
    }

    #[test]
    fn errors_name_the_cell() {
        let env = EnvBuilder::with_sizes(2, 2, 3)
            .stay(0, 0, vec![0.5])
            .stay(0, 1, vec![0.5])
            .stay(1, 0, vec![0.5])
            .stay(1, 1, vec![0.5])
            .jump(0, 0, vec![0.0, 1.0])
            .jump(0, 1, vec![0.0, 1.0])
            .jump(1, 0, vec![1.0, 0.0])
            .jump(1, 1, vec![1.0, 0.0])
            .admissible(0, vec![vec![0], vec![1]])
            .build()
            .unwrap();
        let err = env.transition_prob(ExtendedState::new(0, 0), 1, ExtendedState::new(1, 0));
        assert!(matches!(err, Err(SmdpError::InadmissibleAction { x: 0, t: 0, a: 1 })));
        assert!(err.unwrap_err().to_string().contains("(x=0, t=0)"));
        assert!(env.transition_prob(ExtendedState::new(0, 4), 1, ExtendedState::new(1, 0)).is_ok());
        assert!(matches!(
            env.state_transition_prob(7, ExtendedState::new(0, 1), 1),
            Err(SmdpError::UnknownState(7))
        ));
        assert!(matches!(
            env.transition_prob(ExtendedState::new(9, 0), 0, ExtendedState::new(1, 0)),
            Err(SmdpError::UnknownState(9))
        ));
    }

    #[test]
    fn zero_terminal_table() {
        let env = EnvBuilder::with_sizes(1, 1, 2).stay(0, 0, vec![1.0]).jump(0, 0, vec![0.0]).build().unwrap();
        assert_eq!(env.terminal_reward(ExtendedState::new(0, 0)), 0.0);
        assert_eq!(env.terminal_reward(ExtendedState::new(0, 17)), 0.0);
    }

    #[test]
    fn expected_next_state_reward() {
        // rbar(x' | 0, t, a) = 10 if x' == 1 else 2.
        let row = vec![2.0, 10.0, 2.0, 10.0];
        let table = NextStateReward { stages: vec![vec![vec![row.clone()], vec![row]]] };
        let env = EnvBuilder::with_sizes(2, 2, 3)
            .stay(0, 0, vec![0.75])
            .stay(0, 1, vec![0.5])
            .stay(1, 0, vec![1.0])
            .stay(1, 1, vec![1.0])
            .jump(0, 0, vec![0.0, 1.0])
            .jump(0, 1, vec![0.0, 1.0])
            .jump(1, 0, vec![1.0, 0.0])
            .jump(1, 1, vec![1.0, 0.0])
            .reward(Reward::ExpectedNextState(table))
            .build()
            .unwrap();
        let r = env.stage_reward(0, ExtendedState::new(0, 0), 0).unwrap();
        assert!((r - (0.75 * 2.0 + 0.25 * 10.0)).abs() < 1e-15);
        let r = env.stage_reward(2, ExtendedState::new(0, 1), 1).unwrap();
        assert!((r - 6.0).abs() < 1e-15);
        assert_eq!(env.realized_reward(0, ExtendedState::new(0, 0), 0, 1), 10.0);
    }
}
