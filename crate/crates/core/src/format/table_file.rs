//! JSON files for value tables, Q-tables and policies.
//!
//! Stage `n` is a flat array in `(x, t)` row-major order with `t <= n`; Q
//! stages append the action as the fastest index and write inadmissible
//! cells as `null`.

use serde::{Deserialize, Serialize};

use super::{from_json, sha256_hex, FormatError, FormatResult, Num, FORMAT_VERSION, TOOL_VERSION};
use crate::tables::{Policy, QTable, ValueTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    Value,
    Q,
    Policy,
}

/// Identifies the environment and tool that produced an artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub env_hash: String,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(env_hash: impl Into<String>) -> Self {
        Self { env_hash: env_hash.into(), tool_version: TOOL_VERSION.to_string() }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile<T> {
    format_version: u32,
    kind: TableKind,
    env_hash: String,
    tool_version: String,
    horizon: usize,
    n_states: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_actions: Option<usize>,
    stages: Vec<Vec<T>>,
}

fn provenance<T>(file: &TableFile<T>) -> Provenance {
    Provenance { env_hash: file.env_hash.clone(), tool_version: file.tool_version.clone() }
}

fn write<T: Serialize>(file: &TableFile<T>) -> String {
    let mut text = serde_json::to_string(file).expect("plain data");
    text.push('\n');
    text
}

fn read<T: for<'de> Deserialize<'de>>(text: &str, kind: TableKind) -> FormatResult<TableFile<T>> {
    let file: TableFile<T> = from_json(text)?;
    if file.format_version != FORMAT_VERSION {
        return Err(FormatError::parse("format_version", format!("unsupported version {}", file.format_version)));
    }
    if file.kind != kind {
        return Err(FormatError::parse("kind", format!("expected a {kind:?} table, found {:?}", file.kind)));
    }
    Ok(file)
}

pub fn write_value_table(v: &ValueTable, provenance: &Provenance) -> String {
    write(&TableFile {
        format_version: FORMAT_VERSION,
        kind: TableKind::Value,
        env_hash: provenance.env_hash.clone(),
        tool_version: provenance.tool_version.clone(),
        horizon: v.horizon(),
        n_states: v.n_states(),
        n_actions: None,
        stages: (0..=v.horizon()).map(|n| v.stage_values(n).iter().copied().map(Num).collect()).collect(),
    })
}

pub fn read_value_table(text: &str) -> FormatResult<(ValueTable, Provenance)> {
    let file: TableFile<Num> = read(text, TableKind::Value)?;
    if file.stages.len() != file.horizon + 1 {
        return Err(FormatError::parse("stages", format!("expected {} stages", file.horizon + 1)));
    }
    let stages = file.stages.iter().map(|s| s.iter().map(|v| v.0).collect()).collect();
    Ok((ValueTable::from_stages(file.n_states, stages)?, provenance(&file)))
}

pub fn write_q_table(q: &QTable, provenance: &Provenance) -> String {
    write(&TableFile {
        format_version: FORMAT_VERSION,
        kind: TableKind::Q,
        env_hash: provenance.env_hash.clone(),
        tool_version: provenance.tool_version.clone(),
        horizon: q.horizon(),
        n_states: q.n_states(),
        n_actions: Some(q.n_actions()),
        stages: (0..=q.horizon())
            .map(|n| q.stage_values(n).iter().map(|&v| (!v.is_nan()).then_some(Num(v))).collect())
            .collect(),
    })
}

pub fn read_q_table(text: &str) -> FormatResult<(QTable, Provenance)> {
    let file: TableFile<Option<Num>> = read(text, TableKind::Q)?;
    let n_actions = file.n_actions.ok_or_else(|| FormatError::parse("n_actions", "missing"))?;
    if file.stages.len() != file.horizon + 1 {
        return Err(FormatError::parse("stages", format!("expected {} stages", file.horizon + 1)));
    }
    let stages = file.stages.iter().map(|s| s.iter().map(|v| v.map_or(f64::NAN, |n| n.0)).collect()).collect();
    Ok((QTable::from_stages(file.n_states, n_actions, stages)?, provenance(&file)))
}

fn policy_stages(policy: &Policy) -> Vec<Vec<usize>> {
    (0..policy.horizon()).map(|n| policy.stage_actions(n).to_vec()).collect()
}

pub fn write_policy(policy: &Policy, provenance: &Provenance) -> String {
    write(&TableFile {
        format_version: FORMAT_VERSION,
        kind: TableKind::Policy,
        env_hash: provenance.env_hash.clone(),
        tool_version: provenance.tool_version.clone(),
        horizon: policy.horizon(),
        n_states: policy.n_states(),
        n_actions: None,
        stages: policy_stages(policy),
    })
}

pub fn read_policy(text: &str) -> FormatResult<(Policy, Provenance)> {
    let file: TableFile<usize> = read(text, TableKind::Policy)?;
    if file.stages.len() != file.horizon {
        return Err(FormatError::parse("stages", format!("expected {} stages", file.horizon)));
    }
    let prov = provenance(&file);
    Ok((Policy::from_stages(file.n_states, file.stages)?, prov))
}

/// SHA-256 of the policy's action arrays.
pub fn policy_hash(policy: &Policy) -> String {
    sha256_hex(serde_json::to_string(&policy_stages(policy)).expect("plain data").as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::solve_bellman;
    use crate::coins::{build_coins_env, CoinsParams};
    use crate::env::{EnvBuilder, Reward, StateReward};

    #[test]
    fn tables_round_trip() {
        let env = build_coins_env(&CoinsParams::new(vec![0.2, 0.8], 3, -10.0, 7)).unwrap();
        let sol = solve_bellman(&env).unwrap();
        let prov = Provenance::new("abc");
        let text = write_value_table(&sol.values, &prov);
        let (v, p) = read_value_table(&text).unwrap();
        assert_eq!((v, p), (sol.values.clone(), prov.clone()));
        let (q, _) = read_q_table(&write_q_table(&sol.q, &prov)).unwrap();
        assert_eq!(q.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), sol.q.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let (policy, _) = read_policy(&write_policy(&sol.policy, &prov)).unwrap();
        assert_eq!(policy, sol.policy);
        assert!(read_policy(&text).is_err());
    }

    #[test]
    fn inadmissible_q_cells_are_null() {
        let env = EnvBuilder::with_sizes(1, 2, 2)
            .stay(0, 0, vec![1.0])
            .stay(0, 1, vec![1.0])
            .jump(0, 0, vec![0.0])
            .jump(0, 1, vec![0.0])
            .admissible(0, vec![vec![1]])
            .reward(Reward::CurrentState(StateReward::Table(vec![vec![1.0]])))
            .build()
            .unwrap();
        let q = solve_bellman(&env).unwrap().q;
        let text = write_q_table(&q, &Provenance::new("h"));
        assert!(text.contains("null"));
        let (back, _) = read_q_table(&text).unwrap();
        assert_eq!(back.get(1, crate::env::ExtendedState::new(0, 1), 1).unwrap(), q.get(1, crate::env::ExtendedState::new(0, 1), 1).unwrap());
        assert!(back.values()[0].is_nan());
    }

    #[test]
    fn hashes_distinguish_policies() {
        let env = build_coins_env(&CoinsParams::new(vec![0.2, 0.8], 3, -10.0, 4)).unwrap();
        let a = Policy::constant(&env, 0).unwrap();
        let b = Policy::constant(&env, 1).unwrap();
        assert_ne!(policy_hash(&a), policy_hash(&b));
        assert_eq!(policy_hash(&a), policy_hash(&a.clone()));
    }
}
