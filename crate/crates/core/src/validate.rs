//! Structural and normalization checks on environments.

use std::fmt;

use crate::env::{EnvSpec, Reward, StateReward, Terminal};

/// Absolute tolerance for probability normalization.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Location {
    Env,
    State { x: usize },
    StateAge { x: usize, t: usize },
    /// Kernel entry for `(x, a)` at position `age` of its per-age array.
    Kernel { x: usize, a: usize, age: usize },
    Cell { x: usize, t: usize, a: usize },
    Transition { x: usize, t: usize, a: usize, y: usize, s: usize },
    Reward,
    Terminal,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Location::Env => write!(f, "env"),
            Location::State { x } => write!(f, "x={x}"),
            Location::StateAge { x, t } => write!(f, "(x={x}, t={t})"),
            Location::Kernel { x, a, age } => write!(f, "(x={x}, a={a}) age entry {age}"),
            Location::Cell { x, t, a } => write!(f, "(x={x}, t={t}, a={a})"),
            Location::Transition { x, t, a, y, s } => write!(f, "(x={x}, t={t}, a={a}) -> (y={y}, s={s})"),
            Location::Reward => write!(f, "reward"),
            Location::Terminal => write!(f, "terminal"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    /// Row is not a probability distribution.
    Normalization,
    /// Mass on `(x, s)` with `s != t + 1`.
    StayAge,
    /// Mass on `(y, s)` with `y != x` and `s != 0`.
    JumpAge,
    EmptyAdmissible,
    Shape,
    NonFinite,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub kind: IssueKind,
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn push(&mut self, kind: IssueKind, location: Location, message: impl Into<String>) {
        self.issues.push(Issue { kind, location, message: message.into() });
    }

    pub fn has(&self, kind: IssueKind, location: Location) -> bool {
        self.issues.iter().any(|i| i.kind == kind && i.location == location)
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.issues.extend(other.issues);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Checks every constraint an [`EnvSpec`] must satisfy; an empty report
/// means the environment is valid.
pub fn validate_env(env: &EnvSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (n_states, n_actions, horizon) = (env.n_states(), env.n_actions(), env.horizon());
    if n_states == 0 || n_actions == 0 {
        report.push(IssueKind::Shape, Location::Env, "state and action sets must be non-empty");
        return report;
    }
    if horizon == 0 {
        report.push(IssueKind::Shape, Location::Env, "horizon must be positive");
    }
    check_admissible(env, &mut report);
    check_kernel(env, &mut report);
    check_rewards(env, &mut report);
    report
}

fn check_admissible(env: &EnvSpec, report: &mut ValidationReport) {
    let Some(table) = env.admissible_table() else {
        return;
    };
    if table.len() != env.n_states() {
        report.push(IssueKind::Shape, Location::Env, format!("admissible table has {} states", table.len()));
        return;
    }
    for (x, by_age) in table.iter().enumerate() {
        if by_age.is_empty() {
            report.push(IssueKind::EmptyAdmissible, Location::StateAge { x, t: 0 }, "no admissible actions");
        }
        for (t, set) in by_age.iter().enumerate() {
            if set.is_empty() {
                report.push(IssueKind::EmptyAdmissible, Location::StateAge { x, t }, "no admissible actions");
            }
            if let Some(&a) = set.iter().find(|&&a| a >= env.n_actions()) {
                report.push(IssueKind::Shape, Location::StateAge { x, t }, format!("unknown action id {a}"));
            }
        }
    }
}

/// Ages `0..horizon` at which the per-age entry `k` of an array of length
/// `len` is consulted.
fn ages_using(k: usize, len: usize, horizon: usize) -> std::ops::Range<usize> {
    if k + 1 == len {
        k..horizon.max(k + 1)
    } else {
        k..k + 1
    }
}

fn check_kernel(env: &EnvSpec, report: &mut ValidationReport) {
    let (n_states, n_actions, horizon) = (env.n_states(), env.n_actions(), env.horizon());
    let kernel = env.kernel();
    if kernel.stay.len() != n_states * n_actions || kernel.jump.len() != n_states * n_actions {
        report.push(IssueKind::Shape, Location::Env, "kernel must have one row per (state, action)");
        return;
    }
    for x in 0..n_states {
        for a in 0..n_actions {
            let used = |k: usize, len: usize| ages_using(k, len, horizon).any(|t| env.is_admissible(x, t, a));
            let stay = &kernel.stay[x * n_actions + a];
            if stay.is_empty() {
                report.push(IssueKind::Shape, Location::Kernel { x, a, age: 0 }, "missing stay_prob");
            }
            for (k, &p) in stay.iter().enumerate() {
                if !used(k, stay.len()) {
                    continue;
                }
                if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                    report.push(
                        IssueKind::Normalization,
                        Location::Kernel { x, a, age: k },
                        format!("stay_prob {p} outside [0, 1]"),
                    );
                }
            }
            let jump = &kernel.jump[x * n_actions + a];
            if jump.is_empty() && n_states > 1 {
                report.push(IssueKind::Shape, Location::Kernel { x, a, age: 0 }, "missing jump_prob");
            }
            for (k, dest) in jump.iter().enumerate() {
                if !used(k, jump.len()) {
                    continue;
                }
                check_jump_row(x, a, k, dest, n_states, report);
            }
            if n_states == 1 {
                for (k, &p) in stay.iter().enumerate() {
                    if used(k, stay.len()) && p != 1.0 {
                        report.push(
                            IssueKind::Normalization,
                            Location::Kernel { x, a, age: k },
                            "single-state env requires stay_prob = 1",
                        );
                    }
                }
            }
        }
    }
}

fn check_jump_row(x: usize, a: usize, k: usize, dest: &[f64], n_states: usize, report: &mut ValidationReport) {
    let loc = Location::Kernel { x, a, age: k };
    if dest.len() != n_states {
        report.push(IssueKind::Shape, loc, format!("jump_prob has {} entries, expected {n_states}", dest.len()));
        return;
    }
    if let Some(p) = dest.iter().find(|p| !p.is_finite() || !(0.0..=1.0).contains(*p)) {
        report.push(IssueKind::Normalization, loc, format!("jump_prob entry {p} outside [0, 1]"));
    }
    if dest[x] != 0.0 {
        report.push(
            IssueKind::StayAge,
            loc,
            format!("jump to the current state puts mass {} on age 0", dest[x]),
        );
    }
    if n_states > 1 {
        let total: f64 = dest.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            report.push(IssueKind::Normalization, loc, format!("jump_prob sums to {total}"));
        }
    }
}

fn check_table(rows: &[Vec<f64>], n_states: usize, loc: Location, what: &str, report: &mut ValidationReport) {
    if rows.len() != n_states {
        report.push(IssueKind::Shape, loc, format!("{what} table has {} states, expected {n_states}", rows.len()));
        return;
    }
    for (x, row) in rows.iter().enumerate() {
        if row.is_empty() {
            report.push(IssueKind::Shape, Location::State { x }, format!("empty {what} row"));
        }
        if let Some(t) = row.iter().position(|v| !v.is_finite()) {
            report.push(IssueKind::NonFinite, Location::StateAge { x, t }, format!("non-finite {what}"));
        }
    }
}

fn check_rewards(env: &EnvSpec, report: &mut ValidationReport) {
    let (n_states, n_actions) = (env.n_states(), env.n_actions());
    match env.reward() {
        Reward::CurrentState(StateReward::Table(rows)) => check_table(rows, n_states, Location::Reward, "reward", report),
        Reward::CurrentState(StateReward::Coins { p, r_cheat, .. }) => {
            if n_states != 2 {
                report.push(IssueKind::Shape, Location::Reward, "coins reward needs exactly two states");
            }
            if p.len() != n_actions {
                report.push(IssueKind::Shape, Location::Reward, format!("coins rule lists {} coins", p.len()));
            } else if n_states == 2 {
                for (a, &pa) in p.iter().enumerate() {
                    let stays = [(0, 1.0 - pa), (1, pa)];
                    for (x, expected) in stays {
                        let row = &env.kernel().stay[x * n_actions + a];
                        if row.iter().any(|&s| (s - expected).abs() > PROB_TOL) {
                            report.push(
                                IssueKind::Inconsistent,
                                Location::Kernel { x, a, age: 0 },
                                format!("coins rule p={pa} disagrees with stay_prob"),
                            );
                        }
                    }
                }
            }
            if !r_cheat.is_finite() {
                report.push(IssueKind::NonFinite, Location::Reward, "r_cheat must be finite");
            }
        }
        Reward::ExpectedNextState(table) => {
            if table.stages.is_empty() {
                report.push(IssueKind::Shape, Location::Reward, "next-state reward has no stages");
            }
            for stage in &table.stages {
                if stage.len() != n_states {
                    report.push(IssueKind::Shape, Location::Reward, "next-state reward stage must list every state");
                    continue;
                }
                for (x, ages) in stage.iter().enumerate() {
                    if ages.is_empty() {
                        report.push(IssueKind::Shape, Location::State { x }, "empty next-state reward row");
                    }
                    for (t, row) in ages.iter().enumerate() {
                        if row.len() != n_actions * n_states {
                            report.push(IssueKind::Shape, Location::StateAge { x, t }, "next-state reward row has wrong width");
                        } else if row.iter().any(|v| !v.is_finite()) {
                            report.push(IssueKind::NonFinite, Location::StateAge { x, t }, "non-finite next-state reward");
                        }
                    }
                }
            }
        }
    }
    match env.terminal() {
        Terminal::SameAsReward => {
            if matches!(env.reward(), Reward::ExpectedNextState(_)) {
                report.push(
                    IssueKind::Inconsistent,
                    Location::Terminal,
                    "\"same-as-reward\" terminal needs a current-state reward",
                );
            }
        }
        Terminal::Table(rows) => check_table(rows, n_states, Location::Terminal, "terminal", report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coins::{build_coins_env, CoinsParams};
    use crate::env::EnvBuilder;

    fn two_state() -> EnvBuilder {
        EnvBuilder::with_sizes(2, 2, 4)
            .stay(0, 0, vec![0.3])
            .stay(0, 1, vec![0.6])
            .stay(1, 0, vec![0.1])
            .stay(1, 1, vec![0.9])
            .jump(0, 0, vec![0.0, 1.0])
            .jump(0, 1, vec![0.0, 1.0])
            .jump(1, 0, vec![1.0, 0.0])
            .jump(1, 1, vec![1.0, 0.0])
    }

    #[test]
    fn coins_preset_is_valid() {
        let env = build_coins_env(&CoinsParams::standard()).unwrap();
        assert!(validate_env(&env).is_empty());
    }

    #[test]
    fn jump_sum_violation_names_state_action() {
        let env = EnvBuilder::with_sizes(3, 2, 4)
            .stay(0, 0, vec![0.5])
            .stay(0, 1, vec![0.5])
            .stay(1, 0, vec![0.5])
            .stay(1, 1, vec![0.5])
            .stay(2, 0, vec![0.5])
            .stay(2, 1, vec![0.5])
            .jump(0, 0, vec![0.0, 0.5, 0.5])
            .jump(0, 1, vec![0.0, 0.5, 0.5])
            .jump(1, 0, vec![0.5, 0.0, 0.5])
            .jump(1, 1, vec![0.5, 0.0, 0.4])
            .jump(2, 0, vec![0.5, 0.5, 0.0])
            .jump(2, 1, vec![0.5, 0.5, 0.0])
            .build_unchecked();
        let report = validate_env(&env);
        assert_eq!(report.issues.len(), 1, "{report}");
        assert!(report.has(IssueKind::Normalization, Location::Kernel { x: 1, a: 1, age: 0 }));
        assert!(report.to_string().contains("x=1, a=1"));
    }

    #[test]
    fn empty_admissible_names_state_age() {
        let env = two_state().admissible(1, vec![vec![0, 1], vec![0], vec![]]).build_unchecked();
        let report = validate_env(&env);
        assert!(report.has(IssueKind::EmptyAdmissible, Location::StateAge { x: 1, t: 2 }), "{report}");
        assert_eq!(report.issues.len(), 1);
    }

    #[test]
    fn self_jump_is_a_structural_violation() {
        let env = two_state().jump(0, 1, vec![0.25, 0.75]).build_unchecked();
        let report = validate_env(&env);
        assert!(report.has(IssueKind::StayAge, Location::Kernel { x: 0, a: 1, age: 0 }));
    }

    #[test]
    fn stay_out_of_range_and_missing_rows() {
        let env = two_state().stay(1, 0, vec![0.2, 1.5]).build_unchecked();
        assert!(validate_env(&env).has(IssueKind::Normalization, Location::Kernel { x: 1, a: 0, age: 1 }));
        let env = two_state().stay(1, 0, vec![]).build_unchecked();
        assert!(validate_env(&env).has(IssueKind::Shape, Location::Kernel { x: 1, a: 0, age: 0 }));
    }

    #[test]
    fn inadmissible_rows_are_not_checked() {
        let env = two_state()
            .stay(0, 1, vec![7.0])
            .admissible(0, vec![vec![0]])
            .build_unchecked();
        assert!(validate_env(&env).is_empty());
    }

    #[test]
    fn tolerance_is_absolute_1e12() {
        let env = two_state().jump(0, 0, vec![0.0, 1.0 + 5e-13]).build_unchecked();
        // entry above 1 still flagged as out of range
        assert!(!validate_env(&env).is_empty());
        let env = two_state().jump(0, 0, vec![0.0, 1.0 - 5e-13]).build_unchecked();
        assert!(validate_env(&env).is_empty());
        let env = two_state().jump(0, 0, vec![0.0, 1.0 - 5e-12]).build_unchecked();
        assert!(!validate_env(&env).is_empty());
    }

    #[test]
    fn single_state_requires_certain_stay() {
        let env = EnvBuilder::with_sizes(1, 1, 3).stay(0, 0, vec![0.9]).build_unchecked();
        assert!(validate_env(&env).has(IssueKind::Normalization, Location::Kernel { x: 0, a: 0, age: 0 }));
    }

    #[test]
    fn coins_rule_must_match_kernel() {
        let env = two_state()
            .reward(Reward::CurrentState(StateReward::Coins { p: vec![0.7, 0.4], t_cheat: 3, r_cheat: -10.0 }))
            .build_unchecked();
        let report = validate_env(&env);
        assert!(report.issues.iter().all(|i| i.kind == IssueKind::Inconsistent));
        assert!(!report.is_empty());
    }
}
