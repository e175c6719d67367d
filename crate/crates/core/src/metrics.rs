//! Batch reward statistics and their aggregation over replications.

use rayon::prelude::*;

use crate::env::EnvSpec;
use crate::error::{Result, SmdpError};
use crate::qlearn::{train, TrainConfig};

/// z-quantile of the two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

/// Per-batch mean, min and max of one run's episode rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSeries {
    pub batch_size: usize,
    pub avg: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MetricsSeries {
    pub fn len(&self) -> usize {
        self.avg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.avg.is_empty()
    }
}

/// Splits `rewards` into full batches of `batch_size`; a trailing partial
/// batch is dropped.
pub fn batch_metrics(rewards: &[f64], batch_size: usize) -> Result<MetricsSeries> {
    if batch_size == 0 {
        return Err(SmdpError::InvalidConfig("batch size must be at least 1".into()));
    }
    let mut series = MetricsSeries { batch_size, avg: Vec::new(), min: Vec::new(), max: Vec::new() };
    for batch in rewards.chunks_exact(batch_size) {
        let mean = batch.iter().sum::<f64>() / batch_size as f64;
        let lo = batch.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = batch.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // rounding in the mean must not leave [min, max]
        series.avg.push(mean.clamp(lo, hi));
        series.min.push(lo);
        series.max.push(hi);
    }
    Ok(series)
}

/// Mean and 95% half-width of one batch statistic across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// `None` with a single replication.
    pub ci95: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub batch_index: usize,
    pub avg: Estimate,
    pub min: Estimate,
    pub max: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedMetrics {
    pub rows: Vec<AggregateRow>,
}

/// Mean is taken relative to the first sample so that identical samples
/// give that sample back and a zero half-width.
fn estimate(samples: &[f64]) -> Estimate {
    let r = samples.len() as f64;
    let base = samples[0];
    let mean = base + samples.iter().map(|v| v - base).sum::<f64>() / r;
    let ci95 = (samples.len() > 1).then(|| {
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
        Z95 * var.sqrt() / r.sqrt()
    });
    Estimate { mean, ci95 }
}

/// Aggregates replications in the order given.
pub fn aggregate(series: &[MetricsSeries]) -> Result<AggregatedMetrics> {
    let Some(first) = series.first() else {
        return Err(SmdpError::InvalidConfig("no replications to aggregate".into()));
    };
    if series.iter().any(|s| s.len() != first.len() || s.batch_size != first.batch_size) {
        return Err(SmdpError::ShapeMismatch("replications differ in batch count or batch size".into()));
    }
    let column = |k: usize, pick: fn(&MetricsSeries) -> &Vec<f64>| -> Vec<f64> {
        series.iter().map(|s| pick(s)[k]).collect()
    };
    let rows = (0..first.len())
        .map(|k| AggregateRow {
            batch_index: k,
            avg: estimate(&column(k, |s| &s.avg)),
            min: estimate(&column(k, |s| &s.min)),
            max: estimate(&column(k, |s| &s.max)),
        })
        .collect();
    Ok(AggregatedMetrics { rows })
}

/// Seed of replication `r`.
pub fn replication_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

/// Per-replication episode rewards; replication `r` trains with
/// [`replication_seed`]`(config.seed, r)`.
pub fn replicate_rewards(env: &EnvSpec, config: &TrainConfig, replications: usize) -> Result<Vec<Vec<f64>>> {
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let cfg = TrainConfig { seed: replication_seed(config.seed, r), ..config.clone() };
            train(env, &cfg, None).map(|res| res.rewards)
        })
        .collect()
}

/// Runs independent training replications and aggregates their batch
/// statistics.
pub fn monte_carlo_curves(
    env: &EnvSpec,
    config: &TrainConfig,
    replications: usize,
    batch_size: usize,
) -> Result<AggregatedMetrics> {
    let rewards = replicate_rewards(env, config, replications)?;
    let series = rewards.iter().map(|r| batch_metrics(r, batch_size)).collect::<Result<Vec<_>>>()?;
    aggregate(&series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvBuilder, Reward, StateReward};
    use crate::qlearn::LearningSchedule;

    #[test]
    fn small_batches() {
        let s = batch_metrics(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!((s.avg, s.min, s.max), (vec![1.5, 3.5], vec![1.0, 3.0], vec![2.0, 4.0]));
        let c = batch_metrics(&[0.1; 30], 3).unwrap();
        assert!(c.avg.iter().chain(&c.min).chain(&c.max).all(|&v| v == 0.1));
        assert_eq!(batch_metrics(&vec![1.0; 101], 50).unwrap().len(), 2);
        assert!(batch_metrics(&[], 5).unwrap().is_empty());
        assert!(batch_metrics(&[1.0], 0).is_err());
    }

    #[test]
    fn estimates() {
        let e = estimate(&[1.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert!((e.ci95.unwrap() - 1.96 * 2f64.sqrt() / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(estimate(&[0.1; 7]), Estimate { mean: 0.1, ci95: Some(0.0) });
        assert_eq!(estimate(&[4.0]).ci95, None);
    }

    #[test]
    fn deterministic_env_has_zero_width() {
        let env = EnvBuilder::with_sizes(2, 2, 3)
            .stay(0, 0, vec![1.0])
            .stay(0, 1, vec![1.0])
            .stay(1, 0, vec![1.0])
            .stay(1, 1, vec![1.0])
            .jump(0, 0, vec![0.0, 1.0])
            .jump(0, 1, vec![0.0, 1.0])
            .jump(1, 0, vec![1.0, 0.0])
            .jump(1, 1, vec![1.0, 0.0])
            .reward(Reward::CurrentState(StateReward::Table(vec![vec![0.3, 0.7], vec![0.3, 0.7]])))
            .build()
            .unwrap();
        let config = TrainConfig { episodes: 40, schedule: LearningSchedule::Constant(0.5), ..Default::default() };
        let agg = monte_carlo_curves(&env, &config, 5, 10).unwrap();
        assert_eq!(agg.rows.len(), 4);
        assert!(agg.rows.iter().all(|r| r.avg.ci95 == Some(0.0) && r.min.ci95 == Some(0.0)));
    }

    #[test]
    fn mismatched_replications_are_rejected() {
        let a = batch_metrics(&[1.0; 10], 5).unwrap();
        let b = batch_metrics(&[1.0; 5], 5).unwrap();
        assert!(aggregate(&[a, b]).is_err());
        assert!(aggregate(&[]).is_err());
    }
}
