//! Exact laws and statistical checks for the controlled process.
//!
//! If the state process were Markov, the first inter-jump time from a fresh
//! state would be geometric. Under a policy that switches coins with the
//! age of the current run, it is not, which certifies that the state
//! process alone is only semi-Markov.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::env::{EnvSpec, ExtendedState};
use crate::error::{Result, SmdpError};
use crate::tables::Policy;

/// Absolute tolerance of [`geometric_consistency`].
pub const GEOMETRIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct InterjumpPmf {
    /// `pmf[k - 1] = P(T = k)` for `k = 1..=k_max`.
    pub pmf: Vec<f64>,
    /// `P(T > k_max)`, which includes never leaving within the horizon.
    pub beyond: f64,
}

/// Exact law of the first inter-jump time from `(start_x, 0)` under
/// `policy`, by the survival recursion
/// `P(T = k) = prod_{j < k-1} stay(x, j, pi_j) * (1 - stay(x, k-1, pi_{k-1}))`.
pub fn interjump_pmf(env: &EnvSpec, policy: &Policy, start_x: usize, k_max: usize) -> Result<InterjumpPmf> {
    if k_max > env.horizon() {
        return Err(SmdpError::KMaxExceedsHorizon { k_max, horizon: env.horizon() });
    }
    if start_x >= env.n_states() {
        return Err(SmdpError::UnknownState(start_x));
    }
    policy.check(env)?;
    let mut pmf = Vec::with_capacity(k_max);
    let mut survival = 1.0;
    for j in 0..k_max {
        let s = ExtendedState::new(start_x, j);
        let stay = env.stay_prob(start_x, j, policy.get(j, s)?);
        pmf.push(survival * (1.0 - stay));
        survival *= stay;
    }
    Ok(InterjumpPmf { pmf, beyond: survival })
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometricVerdict {
    Consistent { p: f64 },
    /// `P(T = 1)` is 0 or 1, where every geometric fit is trivial.
    ConsistentDegenerate { p: f64 },
    Inconsistent { index: usize, expected: f64, observed: f64 },
}

impl GeometricVerdict {
    pub fn is_consistent(&self) -> bool {
        !matches!(self, GeometricVerdict::Inconsistent { .. })
    }
}

/// Fits `p = P(T = 1)` and checks `P(T = j) = (1 - p)^(j - 1) p` for every
/// listed `j`, reporting the first violation (1-based).
pub fn geometric_consistency(pmf: &[f64]) -> Result<GeometricVerdict> {
    if pmf.len() < 2 {
        return Err(SmdpError::ShapeMismatch("geometric check needs P(T=1) and P(T=2)".into()));
    }
    let p = pmf[0];
    if p == 0.0 || p == 1.0 {
        return Ok(GeometricVerdict::ConsistentDegenerate { p });
    }
    for (i, &observed) in pmf.iter().enumerate() {
        let expected = (1.0 - p).powi(i as i32) * p;
        if (observed - expected).abs() > GEOMETRIC_TOL {
            return Ok(GeometricVerdict::Inconsistent { index: i + 1, expected, observed });
        }
    }
    Ok(GeometricVerdict::Consistent { p })
}

/// Exact laws of `(X_n, gamma_n)` for `n = 0..=up_to` from `(start_x, 0)`,
/// each laid out `(x, t)` row-major with `t <= n`.
pub fn forward_laws(env: &EnvSpec, policy: &Policy, start_x: usize, up_to: usize) -> Result<Vec<Vec<f64>>> {
    if up_to > env.horizon() {
        return Err(SmdpError::StageOutOfRange { n: up_to, horizon: env.horizon() });
    }
    if start_x >= env.n_states() {
        return Err(SmdpError::UnknownState(start_x));
    }
    let e = env.n_states();
    let mut laws = vec![vec![0.0; e]];
    laws[0][start_x] = 1.0;
    for n in 0..up_to {
        let mut next = vec![0.0; e * (n + 2)];
        for x in 0..e {
            for t in 0..=n {
                let mass = laws[n][x * (n + 1) + t];
                if mass == 0.0 {
                    continue;
                }
                let s = ExtendedState::new(x, t);
                let a = policy.get(n, s)?;
                for (to, p) in env.successors(s, a) {
                    next[to.x * (n + 2) + to.t] += mass * p;
                }
            }
        }
        laws.push(next);
    }
    Ok(laws)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareResult {
    pub fn accepts(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

fn chi_square_p_value(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).map(|d| d.sf(statistic)).unwrap_or(f64::NAN)
}

/// Groups bins so that each group's expected count is at least
/// `min_expected`. Bins below the threshold are pooled into one group,
/// which is merged with the smallest regular bin if it is still too small.
pub fn pool_bins(expected: &[f64], min_expected: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut pooled = Vec::new();
    let mut pooled_mass = 0.0;
    for (i, &e) in expected.iter().enumerate() {
        if e >= min_expected {
            groups.push(vec![i]);
        } else if e > 0.0 {
            pooled.push(i);
            pooled_mass += e;
        }
    }
    if !pooled.is_empty() {
        if pooled_mass < min_expected && !groups.is_empty() {
            let smallest = (0..groups.len())
                .min_by(|&a, &b| expected[groups[a][0]].total_cmp(&expected[groups[b][0]]))
                .unwrap();
            groups[smallest].extend(pooled);
        } else {
            groups.push(pooled);
        }
    }
    groups
}

/// Pearson goodness of fit of `observed` counts to probabilities `probs`,
/// pooling bins with expected count below 5. `fitted` parameters reduce the
/// degrees of freedom.
pub fn chi_square_gof(observed: &[u64], probs: &[f64], fitted: usize) -> ChiSquareResult {
    let total: u64 = observed.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|p| p * total as f64).collect();
    let groups = pool_bins(&expected, 5.0);
    let mut statistic = 0.0;
    for group in &groups {
        let o: f64 = group.iter().map(|&i| observed[i] as f64).sum();
        let e: f64 = group.iter().map(|&i| expected[i]).sum();
        statistic += (o - e) * (o - e) / e;
    }
    // observations in zero-probability bins are impossible under the model
    if observed.iter().zip(probs).any(|(&o, &p)| o > 0 && p == 0.0) {
        statistic = f64::INFINITY;
    }
    let dof = groups.len().saturating_sub(1 + fitted);
    ChiSquareResult { statistic, dof, p_value: chi_square_p_value(statistic, dof) }
}

/// Two-sample chi-square homogeneity test between count vectors, pooling by
/// the reference probabilities `probs` (expected count below 5 in the
/// smaller sample).
pub fn chi_square_two_sample(a: &[u64], b: &[u64], probs: &[f64]) -> ChiSquareResult {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let scale = na.min(nb);
    let expected: Vec<f64> = probs
        .iter()
        .zip(a.iter().zip(b))
        .map(|(&p, (&ca, &cb))| if p == 0.0 && ca + cb > 0 { 5.0 } else { p * scale })
        .collect();
    let groups = pool_bins(&expected, 5.0);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut statistic = 0.0;
    let mut used: usize = 0;
    for group in &groups {
        let ca: f64 = group.iter().map(|&i| a[i] as f64).sum();
        let cb: f64 = group.iter().map(|&i| b[i] as f64).sum();
        if ca + cb == 0.0 {
            continue;
        }
        used += 1;
        let d = ka * ca - kb * cb;
        statistic += d * d / (ca + cb);
    }
    let dof = used.saturating_sub(1);
    ChiSquareResult { statistic, dof, p_value: chi_square_p_value(statistic, dof) }
}

/// Tests sampled inter-jump times (each `>= 1`) against a geometric law
/// fitted by maximum likelihood, with bins `1..k` and a tail bin `>= k`
/// chosen so the tail has expected count at least 5.
pub fn geometric_sample_test(samples: &[usize]) -> ChiSquareResult {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<usize>() as f64 / n;
    let p = 1.0 / mean;
    let mut k = 1;
    while n * (1.0 - p).powi(k as i32) >= 5.0 {
        k += 1;
    }
    // bins T = 1..k-1 and T >= k
    let mut observed = vec![0u64; k];
    for &s in samples {
        observed[(s.max(1) - 1).min(k - 1)] += 1;
    }
    let mut probs: Vec<f64> = (1..k).map(|j| (1.0 - p).powi(j as i32 - 1) * p).collect();
    probs.push((1.0 - p).powi(k as i32 - 1));
    chi_square_gof(&observed, &probs, 1)
}
