//! Stage-indexed value, Q and policy tables over the reachable cells.

use rand::Rng;

use crate::env::{EnvSpec, ExtendedState};
use crate::error::{Result, SmdpError};
use crate::reachable::ReachableSet;

/// Borrowed view of one stage of state values, `(x, t)` row-major with
/// `t <= stage`.
#[derive(Debug, Clone, Copy)]
pub struct StageView<'a> {
    stage: usize,
    n_states: usize,
    values: &'a [f64],
}

impl<'a> StageView<'a> {
    pub fn new(stage: usize, n_states: usize, values: &'a [f64]) -> Result<Self> {
        let expected = n_states * (stage + 1);
        if values.len() != expected {
            return Err(SmdpError::ShapeMismatch(format!(
                "stage {stage} slice has {} values, expected {expected}",
                values.len()
            )));
        }
        Ok(Self { stage, n_states, values })
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn get(&self, s: ExtendedState) -> Option<f64> {
        (s.x < self.n_states && s.t <= self.stage).then(|| self.values[s.x * (self.stage + 1) + s.t])
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    layout: ReachableSet,
    values: Vec<f64>,
}

impl ValueTable {
    pub(crate) fn filled(n_states: usize, horizon: usize, value: f64) -> Self {
        let layout = ReachableSet::new(n_states, 1, horizon);
        Self { values: vec![value; layout.total_len()], layout }
    }

    /// Builds from per-stage slices; stage `n` must hold `|E| (n + 1)` values.
    pub fn from_stages(n_states: usize, stages: Vec<Vec<f64>>) -> Result<Self> {
        let horizon = stages.len().checked_sub(1).ok_or_else(|| SmdpError::ShapeMismatch("no stages".into()))?;
        let mut table = Self::filled(n_states, horizon, 0.0);
        for (n, stage) in stages.into_iter().enumerate() {
            StageView::new(n, n_states, &stage)?;
            table.stage_mut(n).copy_from_slice(&stage);
        }
        Ok(table)
    }

    pub fn horizon(&self) -> usize {
        self.layout.horizon()
    }

    pub fn n_states(&self) -> usize {
        self.layout.n_states()
    }

    pub fn get(&self, n: usize, s: ExtendedState) -> Result<f64> {
        Ok(self.values[self.layout.offset(n, s.x, s.t, 0)?])
    }

    pub(crate) fn set(&mut self, n: usize, s: ExtendedState, v: f64) {
        let i = self.layout.stage_start(n) + self.layout.local_offset(n, s.x, s.t, 0);
        self.values[i] = v;
    }

    pub fn stage(&self, n: usize) -> StageView<'_> {
        StageView { stage: n, n_states: self.n_states(), values: self.stage_values(n) }
    }

    pub fn stage_values(&self, n: usize) -> &[f64] {
        let start = self.layout.stage_start(n);
        &self.values[start..start + self.layout.stage_len(n)]
    }

    fn stage_mut(&mut self, n: usize) -> &mut [f64] {
        let start = self.layout.stage_start(n);
        let len = self.layout.stage_len(n);
        &mut self.values[start..start + len]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `q_n(x, t, a)` for stages `0..=N`. Inadmissible cells hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    layout: ReachableSet,
    values: Vec<f64>,
}

impl QTable {
    pub(crate) fn filled(layout: ReachableSet, value: f64) -> Self {
        Self { values: vec![value; layout.total_len()], layout }
    }

    /// Table with `init(n, s, a)` on admissible decision cells and the
    /// terminal reward on the stage-`N` boundary.
    pub fn from_fn(env: &EnvSpec, mut init: impl FnMut(usize, ExtendedState, usize) -> f64) -> Self {
        let layout = ReachableSet::new(env.n_states(), env.n_actions(), env.horizon());
        let mut q = Self::filled(layout, f64::NAN);
        for n in 0..=env.horizon() {
            for (x, t) in layout.stage_states(n) {
                let s = ExtendedState::new(x, t);
                for &a in env.admissible(x, t) {
                    let v = if n == env.horizon() { env.terminal_reward(s) } else { init(n, s, a) };
                    q.set(n, s, a, v);
                }
            }
        }
        q
    }

    pub fn from_stages(n_states: usize, n_actions: usize, stages: Vec<Vec<f64>>) -> Result<Self> {
        let horizon = stages.len().checked_sub(1).ok_or_else(|| SmdpError::ShapeMismatch("no stages".into()))?;
        let layout = ReachableSet::new(n_states, n_actions, horizon);
        let mut values = Vec::with_capacity(layout.total_len());
        for (n, stage) in stages.into_iter().enumerate() {
            if stage.len() != layout.stage_len(n) {
                return Err(SmdpError::ShapeMismatch(format!(
                    "stage {n} has {} cells, expected {}",
                    stage.len(),
                    layout.stage_len(n)
                )));
            }
            values.extend(stage);
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &ReachableSet {
        &self.layout
    }

    pub fn horizon(&self) -> usize {
        self.layout.horizon()
    }

    pub fn n_states(&self) -> usize {
        self.layout.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.layout.n_actions()
    }

    pub fn get(&self, n: usize, s: ExtendedState, a: usize) -> Result<f64> {
        Ok(self.values[self.layout.offset(n, s.x, s.t, a)?])
    }

    #[inline]
    pub(crate) fn index(&self, n: usize, s: ExtendedState, a: usize) -> usize {
        self.layout.stage_start(n) + self.layout.local_offset(n, s.x, s.t, a)
    }

    #[inline]
    pub(crate) fn set(&mut self, n: usize, s: ExtendedState, a: usize, v: f64) {
        let i = self.index(n, s, a);
        self.values[i] = v;
    }

    #[inline]
    pub(crate) fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    #[inline]
    pub(crate) fn at_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }

    /// Action values at `(n, x, t)`, indexed by action id.
    pub fn row(&self, n: usize, s: ExtendedState) -> &[f64] {
        let start = self.index(n, s, 0);
        &self.values[start..start + self.n_actions()]
    }

    /// Largest value and lowest-index maximizer over `actions`.
    pub fn best(&self, n: usize, s: ExtendedState, actions: &[usize]) -> (usize, f64) {
        let row = self.row(n, s);
        argmax_lowest(actions.iter().map(|&a| (a, row[a])))
    }

    pub fn stage_values(&self, n: usize) -> &[f64] {
        let start = self.layout.stage_start(n);
        &self.values[start..start + self.layout.stage_len(n)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Argmax over `(action, value)` pairs in ascending action order; ties go to
/// the first pair seen.
pub(crate) fn argmax_lowest(pairs: impl Iterator<Item = (usize, f64)>) -> (usize, f64) {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for (a, v) in pairs {
        if best.0 == usize::MAX || v > best.1 {
            best = (a, v);
        }
    }
    best
}

/// Deterministic decision rules `pi_n(x, t)` for `n < N`, `t <= n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy {
    layout: ReachableSet,
    actions: Vec<usize>,
}

impl Policy {
    /// Builds a policy from a rule, checking admissibility on every cell.
    pub fn from_fn(env: &EnvSpec, mut rule: impl FnMut(usize, ExtendedState) -> usize) -> Result<Self> {
        let layout = ReachableSet::new(env.n_states(), 1, env.horizon());
        let mut actions = Vec::with_capacity(layout.count());
        for n in 0..env.horizon() {
            for (x, t) in layout.stage_states(n) {
                let a = rule(n, ExtendedState::new(x, t));
                if !env.is_admissible(x, t, a) {
                    return Err(SmdpError::InadmissiblePolicy { n, x, t });
                }
                actions.push(a);
            }
        }
        Ok(Self { layout, actions })
    }

    /// Uses `a` wherever admissible, otherwise the lowest admissible action.
    pub fn constant(env: &EnvSpec, a: usize) -> Result<Self> {
        Self::from_fn(env, |_, s| {
            let d = env.admissible(s.x, s.t);
            if d.contains(&a) {
                a
            } else {
                d.first().copied().unwrap_or(a)
            }
        })
    }

    /// Uniformly random admissible action on every cell.
    pub fn random<R: Rng + ?Sized>(env: &EnvSpec, rng: &mut R) -> Self {
        Self::from_fn(env, |_, s| {
            let d = env.admissible(s.x, s.t);
            d[rng.random_range(0..d.len())]
        })
        .expect("sampled from admissible sets")
    }

    /// Builds from per-stage action arrays without an environment; pair with
    /// [`Policy::check`].
    pub fn from_stages(n_states: usize, stages: Vec<Vec<usize>>) -> Result<Self> {
        let layout = ReachableSet::new(n_states, 1, stages.len());
        let mut actions = Vec::with_capacity(layout.count());
        for (n, stage) in stages.into_iter().enumerate() {
            if stage.len() != layout.stage_len(n) {
                return Err(SmdpError::ShapeMismatch(format!(
                    "policy stage {n} has {} cells, expected {}",
                    stage.len(),
                    layout.stage_len(n)
                )));
            }
            actions.extend(stage);
        }
        Ok(Self { layout, actions })
    }

    /// Confirms shape and admissibility against `env`.
    pub fn check(&self, env: &EnvSpec) -> Result<()> {
        if self.horizon() != env.horizon() || self.n_states() != env.n_states() {
            return Err(SmdpError::ShapeMismatch(format!(
                "policy has horizon {} over {} states, env has {} over {}",
                self.horizon(),
                self.n_states(),
                env.horizon(),
                env.n_states()
            )));
        }
        for n in 0..self.horizon() {
            for (x, t) in self.layout.stage_states(n) {
                let a = self.actions[self.layout.stage_start(n) + self.layout.local_offset(n, x, t, 0)];
                if !env.is_admissible(x, t, a) {
                    return Err(SmdpError::InadmissiblePolicy { n, x, t });
                }
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.layout.horizon()
    }

    pub fn n_states(&self) -> usize {
        self.layout.n_states()
    }

    pub fn get(&self, n: usize, s: ExtendedState) -> Result<usize> {
        if n >= self.horizon() {
            return Err(SmdpError::StageOutOfRange { n, horizon: self.horizon() });
        }
        Ok(self.actions[self.layout.offset(n, s.x, s.t, 0)?])
    }

    pub fn stage_actions(&self, n: usize) -> &[usize] {
        let start = self.layout.stage_start(n);
        &self.actions[start..start + self.layout.stage_len(n)]
    }

    /// Number of decision cells.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coins::{build_coins_env, CoinsParams};

    #[test]
    fn stage_view_bounds() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let view = StageView::new(1, 2, &v).unwrap();
        assert_eq!(view.get(ExtendedState::new(1, 0)), Some(3.0));
        assert_eq!(view.get(ExtendedState::new(0, 2)), None);
        assert!(StageView::new(2, 2, &v).is_err());
    }

    #[test]
    fn policy_rejects_inadmissible_and_unreachable() {
        let env = build_coins_env(&CoinsParams::new(vec![0.2, 0.8], 3, -10.0, 3)).unwrap();
        assert!(matches!(Policy::from_fn(&env, |_, _| 5), Err(SmdpError::InadmissiblePolicy { n: 0, x: 0, t: 0 })));
        let p = Policy::constant(&env, 1).unwrap();
        assert_eq!(p.len(), 2 * (1 + 2 + 3));
        assert_eq!(p.get(2, ExtendedState::new(1, 2)).unwrap(), 1);
        assert!(matches!(p.get(1, ExtendedState::new(0, 2)), Err(SmdpError::Unreachable { .. })));
        assert!(p.get(3, ExtendedState::new(0, 0)).is_err());
    }

    #[test]
    fn argmax_ties_go_to_lowest() {
        assert_eq!(argmax_lowest([(0, 1.0), (1, 1.0), (2, 0.5)].into_iter()), (0, 1.0));
        assert_eq!(argmax_lowest([(1, 1.0), (3, 2.0)].into_iter()), (3, 2.0));
        assert_eq!(argmax_lowest([(2, f64::NEG_INFINITY)].into_iter()).0, 2);
    }

    #[test]
    fn q_boundary_is_terminal() {
        let env = build_coins_env(&CoinsParams::new(vec![0.2, 0.8], 1, -10.0, 3)).unwrap();
        let q = QTable::from_fn(&env, |_, _, _| 0.5);
        for t in 0..=3 {
            for a in 0..2 {
                assert_eq!(q.get(3, ExtendedState::new(0, t), a).unwrap(), env.terminal_reward(ExtendedState::new(0, t)));
            }
        }
        assert_eq!(q.get(1, ExtendedState::new(1, 1), 0).unwrap(), 0.5);
    }
}
