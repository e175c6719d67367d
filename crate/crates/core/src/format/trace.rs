//! Line-delimited JSON traces: one header record, then per episode one
//! `step` record per transition followed by an `end` record.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{FormatError, FormatResult, Num, FORMAT_VERSION, TOOL_VERSION};
use crate::env::ExtendedState;
use crate::rng::RngKey;
use crate::simulate::{EpisodeTrace, Step};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format_version: u32,
    pub tool_version: String,
    pub env_hash: String,
    pub policy_hash: String,
    pub seed: u64,
    pub episodes: usize,
}

impl TraceHeader {
    pub fn new(env_hash: String, policy_hash: String, seed: u64, episodes: usize) -> Self {
        Self { format_version: FORMAT_VERSION, tool_version: TOOL_VERSION.to_string(), env_hash, policy_hash, seed, episodes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case", deny_unknown_fields)]
enum Record {
    Header(TraceHeader),
    Step { episode: u64, n: usize, x: usize, t: usize, a: usize, reward: Num },
    End { episode: u64, x: usize, t: usize, total_reward: Num },
}

fn line(record: &Record) -> String {
    serde_json::to_string(record).expect("plain data")
}

/// Writes `traces` in order. Episode numbers are the trace stream ids.
pub fn write_trace<W: Write>(out: &mut W, header: &TraceHeader, traces: &[EpisodeTrace]) -> std::io::Result<()> {
    writeln!(out, "{}", line(&Record::Header(header.clone())))?;
    for trace in traces {
        let episode = trace.key.stream;
        for s in &trace.steps {
            let record = Record::Step { episode, n: s.n, x: s.x, t: s.t, a: s.a, reward: Num(s.reward) };
            writeln!(out, "{}", line(&record))?;
        }
        let end = Record::End {
            episode,
            x: trace.final_state.x,
            t: trace.final_state.t,
            total_reward: Num(trace.total_reward),
        };
        writeln!(out, "{}", line(&end))?;
    }
    Ok(())
}

pub fn read_trace(text: &str) -> FormatResult<(TraceHeader, Vec<EpisodeTrace>)> {
    let mut header = None;
    let mut traces = Vec::new();
    let mut steps: Vec<Step> = Vec::new();
    let mut current: Option<u64> = None;
    for (i, raw) in text.lines().enumerate() {
        let loc = || format!("line {}", i + 1);
        if raw.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(raw).map_err(|e| FormatError::parse(loc(), e))?;
        match (record, &header) {
            (Record::Header(h), None) => header = Some(h),
            (Record::Header(_), Some(_)) => return Err(FormatError::parse(loc(), "second header record")),
            (_, None) => return Err(FormatError::parse(loc(), "records before the header")),
            (Record::Step { episode, n, x, t, a, reward }, Some(_)) => {
                if current.is_some_and(|e| e != episode) {
                    return Err(FormatError::parse(loc(), "step of a new episode before the previous end record"));
                }
                if n != steps.len() {
                    return Err(FormatError::parse(loc(), format!("expected stage {}, found {n}", steps.len())));
                }
                current = Some(episode);
                steps.push(Step { n, x, t, a, reward: reward.0 });
            }
            (Record::End { episode, x, t, total_reward }, Some(h)) => {
                if current.is_some_and(|e| e != episode) {
                    return Err(FormatError::parse(loc(), "end record for a different episode"));
                }
                let start = steps.first().map_or(ExtendedState::new(x, t), |s| ExtendedState::new(s.x, s.t));
                traces.push(EpisodeTrace {
                    key: RngKey::new(h.seed, episode),
                    start,
                    steps: std::mem::take(&mut steps),
                    final_state: ExtendedState::new(x, t),
                    total_reward: total_reward.0,
                });
                current = None;
            }
        }
    }
    let header = header.ok_or_else(|| FormatError::parse("line 1", "missing header record"))?;
    if !steps.is_empty() {
        return Err(FormatError::parse("end of file", "episode without an end record"));
    }
    if header.format_version != FORMAT_VERSION {
        return Err(FormatError::parse("line 1", format!("unsupported version {}", header.format_version)));
    }
    Ok((header, traces))
}
