//! Conversion of explicit transition lists `P(y, s | x, t, a)` into the
//! stay/jump kernel, reporting mass on structurally forbidden cells.

use crate::env::{ExtendedState, Kernel};
use crate::validate::{IssueKind, Location, ValidationReport, PROB_TOL};

/// All outgoing mass of one decision cell `(x, t, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub x: usize,
    pub t: usize,
    pub a: usize,
    pub to: Vec<(ExtendedState, f64)>,
}

/// Stay mass and jump mass by destination at one age.
type AgeMass = (f64, Vec<f64>);

/// Builds a kernel from explicit rows. Rows of each `(x, a)` must cover ages
/// `0..k` without gaps; age `k - 1` is reused beyond. Forbidden mass is
/// reported and dropped, so the resulting kernel also fails normalization.
pub fn kernel_from_transitions(
    n_states: usize,
    n_actions: usize,
    rows: &[TransitionRow],
) -> (Kernel, ValidationReport) {
    let mut report = ValidationReport::default();
    let cells = n_states * n_actions;
    // per (x, a): per age, (stay mass, jump mass by destination)
    let mut acc: Vec<Vec<Option<AgeMass>>> = vec![Vec::new(); cells];
    for row in rows {
        let (x, t, a) = (row.x, row.t, row.a);
        if x >= n_states || a >= n_actions {
            report.push(IssueKind::Shape, Location::Cell { x, t, a }, "unknown state or action");
            continue;
        }
        let ages = &mut acc[x * n_actions + a];
        if ages.len() <= t {
            ages.resize(t + 1, None);
        }
        if ages[t].is_some() {
            report.push(IssueKind::Shape, Location::Cell { x, t, a }, "duplicate transition row");
            continue;
        }
        let mut stay = 0.0;
        let mut jump = vec![0.0; n_states];
        let mut total = 0.0;
        for &(to, p) in &row.to {
            let loc = Location::Transition { x, t, a, y: to.x, s: to.t };
            if !(0.0..=1.0).contains(&p) {
                report.push(IssueKind::Normalization, loc, format!("probability {p} outside [0, 1]"));
                continue;
            }
            total += p;
            if to.x >= n_states {
                report.push(IssueKind::Shape, loc, "unknown destination state");
            } else if to.x == x && to.t == t + 1 {
                stay += p;
            } else if to.x != x && to.t == 0 {
                jump[to.x] += p;
            } else if p != 0.0 {
                let kind = if to.x == x { IssueKind::StayAge } else { IssueKind::JumpAge };
                report.push(kind, loc, format!("mass {p} on a structurally forbidden cell"));
            }
        }
        if (total - 1.0).abs() > PROB_TOL {
            report.push(IssueKind::Normalization, Location::Cell { x, t, a }, format!("outgoing mass sums to {total}"));
        }
        ages[t] = Some((stay, jump));
    }

    let mut kernel = Kernel { stay: vec![Vec::new(); cells], jump: vec![Vec::new(); cells] };
    for (i, ages) in acc.into_iter().enumerate() {
        let (x, a) = (i / n_actions, i % n_actions);
        for (t, entry) in ages.into_iter().enumerate() {
            let Some((stay, mut jump)) = entry else {
                report.push(IssueKind::Shape, Location::Cell { x, t, a }, "missing transition row");
                break;
            };
            let moving = 1.0 - stay;
            if moving > 0.0 {
                jump.iter_mut().for_each(|q| *q /= moving);
            } else {
                // never jumps; any destination law will do
                let others = (n_states - 1).max(1) as f64;
                jump = (0..n_states).map(|y| if y == x { 0.0 } else { 1.0 / others }).collect();
            }
            kernel.stay[i].push(stay);
            kernel.jump[i].push(jump);
        }
    }
    (kernel, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(x: usize, t: usize, a: usize, to: &[(usize, usize, f64)]) -> TransitionRow {
        TransitionRow { x, t, a, to: to.iter().map(|&(y, s, p)| (ExtendedState::new(y, s), p)).collect() }
    }

    #[test]
    fn structural_rows_convert() {
        let rows = [
            row(0, 0, 0, &[(0, 1, 0.75), (1, 0, 0.25)]),
            row(0, 1, 0, &[(0, 2, 0.5), (1, 0, 0.5)]),
            row(1, 0, 0, &[(0, 0, 1.0)]),
        ];
        let (kernel, report) = kernel_from_transitions(2, 1, &rows);
        assert!(report.is_empty(), "{report}");
        assert_eq!(kernel.stay[0], vec![0.75, 0.5]);
        assert_eq!(kernel.jump[0], vec![vec![0.0, 1.0], vec![0.0, 1.0]]);
        assert_eq!(kernel.stay[1], vec![0.0]);
    }

    #[test]
    fn forbidden_cells_are_located() {
        let rows = [
            row(0, 2, 0, &[(0, 0, 0.1), (0, 3, 0.4), (1, 0, 0.5)]),
            row(1, 0, 0, &[(0, 4, 0.3), (0, 0, 0.7)]),
        ];
        let (_, report) = kernel_from_transitions(2, 1, &rows);
        assert!(report.has(IssueKind::StayAge, Location::Transition { x: 0, t: 2, a: 0, y: 0, s: 0 }));
        assert!(report.has(IssueKind::JumpAge, Location::Transition { x: 1, t: 0, a: 0, y: 0, s: 4 }));
        assert!(report.has(IssueKind::Shape, Location::Cell { x: 0, t: 0, a: 0 }));
    }

    #[test]
    fn bad_mass_is_located() {
        let (_, report) = kernel_from_transitions(2, 1, &[row(0, 0, 0, &[(0, 1, 0.5), (1, 0, 0.4)])]);
        assert!(report.has(IssueKind::Normalization, Location::Cell { x: 0, t: 0, a: 0 }));
    }
}
