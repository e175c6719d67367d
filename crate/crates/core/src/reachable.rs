//! Layout of stage-indexed tables over the reachable cells `t <= n`.
//!
//! Starting from age 0, the age at stage `n` never exceeds `n`, so stage `n`
//! holds `|E| (n + 1)` extended states. Each stage is stored contiguously in
//! `(x, t, a)` row-major order.

use crate::error::{Result, SmdpError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReachableSet {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
}

impl ReachableSet {
    pub fn new(n_states: usize, n_actions: usize, horizon: usize) -> Self {
        Self { n_states, n_actions, horizon }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Offset of the first cell of stage `n`.
    pub fn stage_start(&self, n: usize) -> usize {
        self.n_states * self.n_actions * n * (n + 1) / 2
    }

    /// Cells in stage `n`.
    pub fn stage_len(&self, n: usize) -> usize {
        self.n_states * (n + 1) * self.n_actions
    }

    /// Decision cells `(n, x, t, a)` for stages `0..N`; equals
    /// `|E| |A| N (N + 1) / 2`.
    pub fn count(&self) -> usize {
        self.stage_start(self.horizon)
    }

    /// All cells including the stage-`N` boundary.
    pub fn total_len(&self) -> usize {
        self.stage_start(self.horizon + 1)
    }

    /// Offset within stage `n` of `(x, t, a)`.
    #[inline]
    pub fn local_offset(&self, n: usize, x: usize, t: usize, a: usize) -> usize {
        (x * (n + 1) + t) * self.n_actions + a
    }

    pub fn contains(&self, n: usize, x: usize, t: usize, a: usize) -> bool {
        n <= self.horizon && x < self.n_states && t <= n && a < self.n_actions
    }

    /// Flat offset of `(n, x, t, a)` across every stage `0..=N`.
    pub fn offset(&self, n: usize, x: usize, t: usize, a: usize) -> Result<usize> {
        if n > self.horizon {
            return Err(SmdpError::StageOutOfRange { n, horizon: self.horizon });
        }
        if x >= self.n_states {
            return Err(SmdpError::UnknownState(x));
        }
        if a >= self.n_actions {
            return Err(SmdpError::UnknownAction(a));
        }
        if t > n {
            return Err(SmdpError::Unreachable { n, x, t });
        }
        Ok(self.stage_start(n) + self.local_offset(n, x, t, a))
    }

    /// Iterates `(x, t)` pairs of stage `n` in storage order.
    pub fn stage_states(&self, n: usize) -> impl Iterator<Item = (usize, usize)> {
        let n_states = self.n_states;
        (0..n_states).flat_map(move |x| (0..=n).map(move |t| (x, t)))
    }
}

/// Reachable-set index for the given sizes.
pub fn reachable_index(n_states: usize, n_actions: usize, horizon: usize) -> ReachableSet {
    ReachableSet::new(n_states, n_actions, horizon)
}
