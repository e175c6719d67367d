//! Discrete-time semi-Markov paths as a time change of a homogeneous Markov
//! additive process.
//!
//! The jump chain `chi` never repeats a state; sojourn lengths `T_k >= 1`
//! depend on the state being left. With `S_0 = 0`, `S_k = T_1 + .. + T_k`
//! and `N_t = max { k : S_k <= t }`, the path is `X_t = chi_{N_t}` with age
//! `gamma_t = t - S_{N_t}`.

use rand::Rng;

use crate::error::{Result, SmdpError};
use crate::rng::{RngKey, StepRng};
use crate::validate::PROB_TOL;

#[derive(Debug, Clone, PartialEq)]
pub struct HmapSpec {
    jump_matrix: Vec<Vec<f64>>,
    /// `sojourn_pmf[x][k - 1] = P(T = k | leaving x)`.
    sojourn_pmf: Vec<Vec<f64>>,
    initial_state: usize,
}

impl HmapSpec {
    /// Validates a jump matrix with zero diagonal and sojourn pmfs that sum
    /// to one within 1e-12.
    pub fn new(jump_matrix: Vec<Vec<f64>>, sojourn_pmf: Vec<Vec<f64>>, initial_state: usize) -> Result<Self> {
        Self::checked(jump_matrix, sojourn_pmf, initial_state, false)
    }

    /// Like [`HmapSpec::new`], rescaling each sojourn pmf to unit mass.
    pub fn renormalized(jump_matrix: Vec<Vec<f64>>, sojourn_pmf: Vec<Vec<f64>>, initial_state: usize) -> Result<Self> {
        Self::checked(jump_matrix, sojourn_pmf, initial_state, true)
    }

    fn checked(
        jump_matrix: Vec<Vec<f64>>,
        mut sojourn_pmf: Vec<Vec<f64>>,
        initial_state: usize,
        renormalize: bool,
    ) -> Result<Self> {
        let n = jump_matrix.len();
        if n == 0 || sojourn_pmf.len() != n || initial_state >= n {
            return Err(SmdpError::InvalidHmap("jump matrix, pmfs and initial state disagree in size".into()));
        }
        for (x, row) in jump_matrix.iter().enumerate() {
            if row.len() != n {
                return Err(SmdpError::InvalidHmap(format!("jump matrix row {x} has {} entries", row.len())));
            }
            if row[x] != 0.0 {
                return Err(SmdpError::InvalidHmap(format!("jump matrix diagonal at {x} is {}", row[x])));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(SmdpError::InvalidHmap(format!("jump matrix row {x} has entries outside [0, 1]")));
            }
            // a single-state chain never jumps
            let total: f64 = row.iter().sum();
            if n > 1 && (total - 1.0).abs() > PROB_TOL {
                return Err(SmdpError::InvalidHmap(format!("jump matrix row {x} sums to {total}")));
            }
        }
        for (x, pmf) in sojourn_pmf.iter_mut().enumerate() {
            if pmf.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(SmdpError::InvalidHmap(format!("sojourn pmf of {x} has entries outside [0, 1]")));
            }
            let total: f64 = pmf.iter().sum();
            if total == 0.0 {
                return Err(SmdpError::ZeroMassPmf(x));
            }
            if renormalize {
                pmf.iter_mut().for_each(|p| *p /= total);
            } else if (total - 1.0).abs() > PROB_TOL {
                return Err(SmdpError::InvalidHmap(format!("sojourn pmf of {x} sums to {total}")));
            }
        }
        Ok(Self { jump_matrix, sojourn_pmf, initial_state })
    }

    pub fn n_states(&self) -> usize {
        self.jump_matrix.len()
    }

    pub fn jump_matrix(&self) -> &[Vec<f64>] {
        &self.jump_matrix
    }

    pub fn sojourn_pmf(&self, x: usize) -> &[f64] {
        &self.sojourn_pmf[x]
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// Longest representable sojourn.
    pub fn t_max(&self) -> usize {
        self.sojourn_pmf.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Geometric law `P(T = k) = (1 - p)^(k - 1) p` on `1..=t_max`, with the
/// mass of `T > t_max` placed on `t_max`. Exact for paths shorter than
/// `t_max`.
pub fn geometric_sojourn(p: f64, t_max: usize) -> Vec<f64> {
    let mut pmf: Vec<f64> = (1..=t_max).map(|k| (1.0 - p).powi(k as i32 - 1) * p).collect();
    if let Some(last) = pmf.last_mut() {
        *last = (1.0 - p).powi(t_max as i32 - 1);
    }
    pmf
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HmapPath {
    pub states: Vec<usize>,
    pub ages: Vec<usize>,
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Samples `X_t` and `gamma_t` for `t = 0..=horizon` by the time change.
/// Jump `k` draws from block `k` of the stream `key`.
pub fn simulate_hmap(h: &HmapSpec, horizon: usize, key: RngKey) -> HmapPath {
    if h.n_states() == 1 {
        return HmapPath { states: vec![h.initial_state; horizon + 1], ages: (0..=horizon).collect() };
    }
    let mut stream = StepRng::new(key);
    let mut chain = vec![h.initial_state];
    let mut jump_times = vec![0usize];
    while *jump_times.last().unwrap() <= horizon {
        let k = chain.len() - 1;
        let current = chain[k];
        let rng = stream.at_step(k as u64);
        let sojourn = sample_index(&h.sojourn_pmf[current], rng) + 1;
        jump_times.push(jump_times[k] + sojourn);
        chain.push(sample_index(&h.jump_matrix[current], rng));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    let mut ages = Vec::with_capacity(horizon + 1);
    let mut count = 0;
    for t in 0..=horizon {
        while jump_times[count + 1] <= t {
            count += 1;
        }
        states.push(chain[count]);
        ages.push(t - jump_times[count]);
    }
    HmapPath { states, ages }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sojourn::sojourn_of_path;

    fn alternating(pmf: Vec<f64>) -> HmapSpec {
        HmapSpec::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![pmf.clone(), pmf], 0).unwrap()
    }

    #[test]
    fn deterministic_time_change() {
        let h = alternating(vec![0.0, 1.0]);
        let path = simulate_hmap(&h, 7, RngKey::new(1, 0));
        assert_eq!(path.states, vec![0, 0, 1, 1, 0, 0, 1, 1]);
        assert_eq!(path.ages, vec![0, 1, 0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn ages_are_the_sojourn_process() {
        let h = HmapSpec::new(
            vec![vec![0.0, 0.5, 0.5], vec![0.3, 0.0, 0.7], vec![1.0, 0.0, 0.0]],
            vec![geometric_sojourn(0.4, 50), vec![0.1, 0.6, 0.3], vec![0.0, 0.0, 0.0, 1.0]],
            1,
        )
        .unwrap();
        for i in 0..500 {
            let path = simulate_hmap(&h, 25, RngKey::new(3, i));
            assert_eq!(path.ages, sojourn_of_path(&path.states));
            assert_eq!(path.states[0], 1);
        }
    }

    #[test]
    fn validation() {
        let swap = || vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(HmapSpec::new(swap(), vec![vec![0.0], vec![1.0]], 0), Err(SmdpError::ZeroMassPmf(0))));
        assert!(HmapSpec::new(vec![vec![0.5, 0.5], vec![1.0, 0.0]], vec![vec![1.0], vec![1.0]], 0).is_err());
        assert!(HmapSpec::new(swap(), vec![vec![0.5, 0.4], vec![1.0]], 0).is_err());
        let h = HmapSpec::renormalized(swap(), vec![vec![0.5, 0.3], vec![1.0]], 0).unwrap();
        assert!((h.sojourn_pmf(0)[0] - 0.625).abs() < 1e-15);
        assert!(HmapSpec::new(swap(), vec![vec![1.0], vec![1.0]], 2).is_err());
    }

    #[test]
    fn geometric_sojourn_sums_to_one() {
        let pmf = geometric_sojourn(0.2, 40);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(pmf[0], 0.2);
        assert!((pmf[1] - 0.16).abs() < 1e-15);
    }
}
