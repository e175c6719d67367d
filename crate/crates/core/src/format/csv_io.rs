//! CSV series: per-episode rewards, per-episode sup errors and aggregated
//! batch metrics. Missing confidence half-widths are empty fields.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{FormatError, FormatResult};
use crate::metrics::{AggregateRow, AggregatedMetrics, Estimate};

#[derive(Serialize, Deserialize)]
struct RewardRow {
    episode: usize,
    total_reward: f64,
}

#[derive(Serialize, Deserialize)]
struct ErrorRow {
    episode: usize,
    sup_error: f64,
}

#[derive(Serialize, Deserialize)]
struct MetricsRow {
    batch_index: usize,
    avg_mean: f64,
    avg_ci95: Option<f64>,
    min_mean: f64,
    min_ci95: Option<f64>,
    max_mean: f64,
    max_ci95: Option<f64>,
}

fn csv_error(e: csv::Error) -> FormatError {
    let location = match e.position() {
        Some(pos) => format!("line {}", pos.line()),
        None => "csv".to_string(),
    };
    match e.into_kind() {
        csv::ErrorKind::Io(io) => FormatError::Io(io),
        kind => FormatError::parse(location, format!("{kind:?}")),
    }
}

fn write_rows<W: Write, T: Serialize>(out: W, header: &[&str], rows: impl Iterator<Item = T>) -> FormatResult<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(header).map_err(csv_error)?;
    for row in rows {
        writer.serialize(row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R, header: &[&str]) -> FormatResult<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let found = reader.headers().map_err(csv_error)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(FormatError::parse("line 1", format!("expected columns {}", header.join(","))));
    }
    reader.deserialize().map(|r| r.map_err(csv_error)).collect()
}

fn check_episodes(episodes: impl Iterator<Item = usize>) -> FormatResult<()> {
    for (i, e) in episodes.enumerate() {
        if e != i {
            return Err(FormatError::parse(format!("line {}", i + 2), format!("expected episode {i}, found {e}")));
        }
    }
    Ok(())
}

const REWARD_COLUMNS: [&str; 2] = ["episode", "total_reward"];
const ERROR_COLUMNS: [&str; 2] = ["episode", "sup_error"];
const METRICS_COLUMNS: [&str; 7] =
    ["batch_index", "avg_mean", "avg_ci95", "min_mean", "min_ci95", "max_mean", "max_ci95"];

pub fn write_rewards_csv<W: Write>(out: W, rewards: &[f64]) -> FormatResult<()> {
    let rows = rewards.iter().enumerate().map(|(episode, &total_reward)| RewardRow { episode, total_reward });
    write_rows(out, &REWARD_COLUMNS, rows)
}

pub fn read_rewards_csv<R: Read>(input: R) -> FormatResult<Vec<f64>> {
    let rows: Vec<RewardRow> = read_rows(input, &REWARD_COLUMNS)?;
    check_episodes(rows.iter().map(|r| r.episode))?;
    Ok(rows.into_iter().map(|r| r.total_reward).collect())
}

pub fn write_errors_csv<W: Write>(out: W, errors: &[f64]) -> FormatResult<()> {
    let rows = errors.iter().enumerate().map(|(episode, &sup_error)| ErrorRow { episode, sup_error });
    write_rows(out, &ERROR_COLUMNS, rows)
}

pub fn read_errors_csv<R: Read>(input: R) -> FormatResult<Vec<f64>> {
    let rows: Vec<ErrorRow> = read_rows(input, &ERROR_COLUMNS)?;
    check_episodes(rows.iter().map(|r| r.episode))?;
    Ok(rows.into_iter().map(|r| r.sup_error).collect())
}

pub fn write_metrics_csv<W: Write>(out: W, metrics: &AggregatedMetrics) -> FormatResult<()> {
    let rows = metrics.rows.iter().map(|r| MetricsRow {
        batch_index: r.batch_index,
        avg_mean: r.avg.mean,
        avg_ci95: r.avg.ci95,
        min_mean: r.min.mean,
        min_ci95: r.min.ci95,
        max_mean: r.max.mean,
        max_ci95: r.max.ci95,
    });
    write_rows(out, &METRICS_COLUMNS, rows)
}

pub fn read_metrics_csv<R: Read>(input: R) -> FormatResult<AggregatedMetrics> {
    let rows: Vec<MetricsRow> = read_rows(input, &METRICS_COLUMNS)?;
    check_episodes(rows.iter().map(|r| r.batch_index))?;
    let rows = rows
        .into_iter()
        .map(|r| AggregateRow {
            batch_index: r.batch_index,
            avg: Estimate { mean: r.avg_mean, ci95: r.avg_ci95 },
            min: Estimate { mean: r.min_mean, ci95: r.min_ci95 },
            max: Estimate { mean: r.max_mean, ci95: r.max_ci95 },
        })
        .collect();
    Ok(AggregatedMetrics { rows })
}
