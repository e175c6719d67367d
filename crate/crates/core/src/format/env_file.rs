//! JSON environment files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "states": ["tails", "heads"],
//!   "actions": ["a1", "a2"],
//!   "horizon": 200,
//!   "kernel": {
//!     "stay_prob": { "tails": { "a1": [0.8], "a2": [0.2] }, "heads": { ... } },
//!     "jump_prob": { "tails": { "a1": { "heads": 1.0 }, ... }, ... }
//!   },
//!   "reward": { "kind": "current-state", "rule": { "type": "coins", "p": [0.2, 0.8], "t_cheat": 3, "r_cheat": -10 } },
//!   "terminal": "same-as-reward"
//! }
//! ```
//!
//! `jump_prob` entries are either one destination map or an array of maps
//! by age. Instead of `stay_prob`/`jump_prob` a kernel may list explicit
//! rows `{ "state", "age", "action", "to": [{ "state", "age", "prob" }] }`;
//! mass on cells forbidden by the stay/jump structure is then reported.
//! `admissible` maps a state to one action list or a list per age.
//! Current-state reward tables map a state to values by age. Expected-next
//! -state tables are a list over stages of `state -> [age] -> action ->
//! destination -> value`. Probabilities and rewards may be numbers or
//! decimal strings.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{floats, from_json, from_value, nums, sha256_hex, FormatError, FormatResult, Num, FORMAT_VERSION};
use crate::env::{EnvBuilder, EnvSpec, ExtendedState, Kernel, NextStateReward, Reward, RewardKind, StateReward, Terminal};
use crate::transitions::{kernel_from_transitions, TransitionRow};
use crate::validate::ValidationReport;

type ByState<T> = IndexMap<String, T>;

fn default_version() -> u32 {
    FORMAT_VERSION
}

fn same_as_reward() -> String {
    "same-as-reward".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvFile {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    admissible: Option<ByState<AdmissibleEntry>>,
    kernel: KernelFile,
    reward: RewardFile,
    terminal: TerminalFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum AdmissibleEntry {
    All(Vec<String>),
    ByAge(Vec<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stay_prob: Option<ByState<IndexMap<String, Vec<Num>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    jump_prob: Option<ByState<IndexMap<String, JumpEntry>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transitions: Option<Vec<TransitionEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum JumpEntry {
    Fixed(IndexMap<String, Num>),
    ByAge(Vec<IndexMap<String, Num>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    state: String,
    age: usize,
    action: String,
    to: Vec<TargetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetEntry {
    state: String,
    age: usize,
    prob: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardFile {
    kind: RewardKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rule: Option<RuleFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
enum RuleFile {
    Coins { p: Vec<Num>, t_cheat: usize, r_cheat: Num },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum TerminalFile {
    Keyword(String),
    Table(ByState<Vec<Num>>),
}

/// Stage list of `state -> [age] -> action -> destination -> value`.
type NextStateTable = Vec<ByState<Vec<IndexMap<String, IndexMap<String, Num>>>>>;

struct Names<'a> {
    what: &'static str,
    index: HashMap<&'a str, usize>,
}

impl<'a> Names<'a> {
    fn new(what: &'static str, names: &'a [String]) -> FormatResult<Self> {
        let mut index = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.as_str(), i).is_some() {
                return Err(FormatError::parse(format!("{what}s[{i}]"), format!("duplicate {what} `{name}`")));
            }
        }
        Ok(Self { what, index })
    }

    fn get(&self, name: &str, location: impl FnOnce() -> String) -> FormatResult<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| FormatError::parse(location(), format!("unknown {} `{name}`", self.what)))
    }
}

impl EnvFile {
    pub fn from_env(env: &EnvSpec) -> Self {
        let states = env.state_names();
        let actions = env.action_names();
        let n_actions = actions.len();
        let kernel = env.kernel();
        let admissible = env.admissible_table().map(|table| {
            table
                .iter()
                .enumerate()
                .map(|(x, ages)| {
                    let names = |set: &Vec<usize>| set.iter().map(|&a| actions[a].clone()).collect::<Vec<_>>();
                    let entry = if ages.len() == 1 {
                        AdmissibleEntry::All(names(&ages[0]))
                    } else {
                        AdmissibleEntry::ByAge(ages.iter().map(names).collect())
                    };
                    (states[x].clone(), entry)
                })
                .collect()
        });
        let dest_map = |x: usize, row: &[f64]| -> IndexMap<String, Num> {
            row.iter()
                .enumerate()
                .filter(|&(y, &q)| y != x || q != 0.0)
                .map(|(y, &q)| (states[y].clone(), Num(q)))
                .collect()
        };
        let mut stay_prob = ByState::new();
        let mut jump_prob = ByState::new();
        for (x, state) in states.iter().enumerate() {
            let mut stay = IndexMap::new();
            let mut jump = IndexMap::new();
            for (a, action) in actions.iter().enumerate() {
                let i = x * n_actions + a;
                stay.insert(action.clone(), nums(&kernel.stay[i]));
                let entry = match kernel.jump[i].as_slice() {
                    [single] => JumpEntry::Fixed(dest_map(x, single)),
                    rows => JumpEntry::ByAge(rows.iter().map(|r| dest_map(x, r)).collect()),
                };
                jump.insert(action.clone(), entry);
            }
            stay_prob.insert(state.clone(), stay);
            jump_prob.insert(state.clone(), jump);
        }
        let by_state = |rows: &[Vec<f64>]| -> ByState<Vec<Num>> {
            rows.iter().enumerate().map(|(x, row)| (states[x].clone(), nums(row))).collect()
        };
        let reward = match env.reward() {
            Reward::CurrentState(StateReward::Table(rows)) => RewardFile {
                kind: RewardKind::CurrentState,
                table: Some(serde_json::to_value(by_state(rows)).expect("plain data")),
                rule: None,
            },
            Reward::CurrentState(StateReward::Coins { p, t_cheat, r_cheat }) => RewardFile {
                kind: RewardKind::CurrentState,
                table: None,
                rule: Some(RuleFile::Coins { p: nums(p), t_cheat: *t_cheat, r_cheat: Num(*r_cheat) }),
            },
            Reward::ExpectedNextState(next) => {
                let n_states = states.len();
                let table: NextStateTable = next
                    .stages
                    .iter()
                    .map(|stage| {
                        stage
                            .iter()
                            .enumerate()
                            .map(|(y, ages)| {
                                let ages = ages
                                    .iter()
                                    .map(|row| {
                                        actions
                                            .iter()
                                            .enumerate()
                                            .map(|(a, action)| {
                                                let dests = states
                                                    .iter()
                                                    .enumerate()
                                                    .map(|(d, name)| (name.clone(), Num(row[a * n_states + d])))
                                                    .collect();
                                                (action.clone(), dests)
                                            })
                                            .collect()
                                    })
                                    .collect();
                                (states[y].clone(), ages)
                            })
                            .collect()
                    })
                    .collect();
                RewardFile {
                    kind: RewardKind::ExpectedNextState,
                    table: Some(serde_json::to_value(table).expect("plain data")),
                    rule: None,
                }
            }
        };
        let terminal = match env.terminal() {
            Terminal::SameAsReward => TerminalFile::Keyword(same_as_reward()),
            Terminal::Table(rows) => TerminalFile::Table(by_state(rows)),
        };
        Self {
            format_version: FORMAT_VERSION,
            states: states.to_vec(),
            actions: actions.to_vec(),
            horizon: env.horizon(),
            admissible,
            kernel: KernelFile { stay_prob: Some(stay_prob), jump_prob: Some(jump_prob), transitions: None },
            reward,
            terminal,
        }
    }

    /// Resolves names and builds the environment. Name and shape errors
    /// fail; model-level violations are returned in the report.
    pub fn into_env(self) -> FormatResult<(EnvSpec, ValidationReport)> {
        if self.format_version != FORMAT_VERSION {
            return Err(FormatError::parse(
                "format_version",
                format!("unsupported version {}, expected {FORMAT_VERSION}", self.format_version),
            ));
        }
        let state_ix = Names::new("state", &self.states)?;
        let action_ix = Names::new("action", &self.actions)?;
        let n_states = self.states.len();
        let n_actions = self.actions.len();
        let mut builder = EnvBuilder::new(self.states.iter().cloned(), self.actions.iter().cloned(), self.horizon);

        if let Some(admissible) = &self.admissible {
            for (state, entry) in admissible {
                let x = state_ix.get(state, || format!("admissible.{state}"))?;
                let lists = match entry {
                    AdmissibleEntry::All(list) => vec![list.clone()],
                    AdmissibleEntry::ByAge(lists) => lists.clone(),
                };
                let mut by_age = Vec::with_capacity(lists.len());
                for (t, list) in lists.iter().enumerate() {
                    let ids = list
                        .iter()
                        .map(|name| action_ix.get(name, || format!("admissible.{state}[{t}]")))
                        .collect::<FormatResult<Vec<_>>>()?;
                    by_age.push(ids);
                }
                builder = builder.admissible(x, by_age);
            }
        }

        let mut report = ValidationReport::default();
        let cells = n_states * n_actions;
        let k = &self.kernel;
        let kernel = if let Some(rows) = &k.transitions {
            if k.stay_prob.is_some() || k.jump_prob.is_some() {
                return Err(FormatError::parse("kernel", "give either transitions or stay_prob/jump_prob"));
            }
            let mut converted = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let loc = || format!("kernel.transitions[{i}]");
                let x = state_ix.get(&row.state, loc)?;
                let a = action_ix.get(&row.action, loc)?;
                let to = row
                    .to
                    .iter()
                    .map(|target| Ok((ExtendedState::new(state_ix.get(&target.state, loc)?, target.age), target.prob.0)))
                    .collect::<FormatResult<Vec<_>>>()?;
                converted.push(TransitionRow { x, t: row.age, a, to });
            }
            let (kernel, issues) = kernel_from_transitions(n_states, n_actions, &converted);
            report.extend(issues);
            kernel
        } else {
            let mut kernel = Kernel { stay: vec![Vec::new(); cells], jump: vec![Vec::new(); cells] };
            for (state, by_action) in k.stay_prob.iter().flatten() {
                let x = state_ix.get(state, || format!("kernel.stay_prob.{state}"))?;
                for (action, probs) in by_action {
                    let a = action_ix.get(action, || format!("kernel.stay_prob.{state}"))?;
                    kernel.stay[x * n_actions + a] = floats(probs);
                }
            }
            for (state, by_action) in k.jump_prob.iter().flatten() {
                let x = state_ix.get(state, || format!("kernel.jump_prob.{state}"))?;
                for (action, entry) in by_action {
                    let a = action_ix.get(action, || format!("kernel.jump_prob.{state}"))?;
                    let maps = match entry {
                        JumpEntry::Fixed(map) => std::slice::from_ref(map),
                        JumpEntry::ByAge(maps) => maps.as_slice(),
                    };
                    let mut rows = Vec::with_capacity(maps.len());
                    for map in maps {
                        let mut row = vec![0.0; n_states];
                        for (dest, q) in map {
                            let y = state_ix.get(dest, || format!("kernel.jump_prob.{state}.{action}"))?;
                            row[y] = q.0;
                        }
                        rows.push(row);
                    }
                    kernel.jump[x * n_actions + a] = rows;
                }
            }
            kernel
        };
        builder = builder.kernel(kernel);

        let by_state = |table: &ByState<Vec<Num>>, prefix: &str| -> FormatResult<Vec<Vec<f64>>> {
            let mut rows = vec![Vec::new(); n_states];
            for (state, values) in table {
                let x = state_ix.get(state, || format!("{prefix}.{state}"))?;
                rows[x] = floats(values);
            }
            Ok(rows)
        };
        let reward = match (self.reward.kind, self.reward.table, self.reward.rule) {
            (_, Some(_), Some(_)) => return Err(FormatError::parse("reward", "give either table or rule")),
            (_, None, None) => return Err(FormatError::parse("reward", "missing table or rule")),
            (RewardKind::CurrentState, None, Some(RuleFile::Coins { p, t_cheat, r_cheat })) => {
                Reward::CurrentState(StateReward::Coins { p: floats(&p), t_cheat, r_cheat: r_cheat.0 })
            }
            (RewardKind::ExpectedNextState, None, Some(_)) => {
                return Err(FormatError::parse("reward.rule", "rules give current-state rewards"))
            }
            (RewardKind::CurrentState, Some(table), None) => {
                let table: ByState<Vec<Num>> = from_value(table, "reward.table")?;
                Reward::CurrentState(StateReward::Table(by_state(&table, "reward.table")?))
            }
            (RewardKind::ExpectedNextState, Some(table), None) => {
                let table: NextStateTable = from_value(table, "reward.table")?;
                let mut stages = Vec::with_capacity(table.len());
                for (n, stage) in table.iter().enumerate() {
                    let mut per_state = vec![Vec::new(); n_states];
                    for (state, ages) in stage {
                        let loc = || format!("reward.table[{n}].{state}");
                        let y = state_ix.get(state, loc)?;
                        for (t, by_action) in ages.iter().enumerate() {
                            let mut row = vec![f64::NAN; n_actions * n_states];
                            for (action, dests) in by_action {
                                let a = action_ix.get(action, || format!("reward.table[{n}].{state}[{t}]"))?;
                                for (dest, v) in dests {
                                    let d = state_ix.get(dest, || format!("reward.table[{n}].{state}[{t}].{action}"))?;
                                    row[a * n_states + d] = v.0;
                                }
                            }
                            if let Some(i) = row.iter().position(|v| v.is_nan()) {
                                return Err(FormatError::parse(
                                    format!("reward.table[{n}].{state}[{t}]"),
                                    format!(
                                        "missing value for action `{}` and destination `{}`",
                                        self.actions[i / n_states],
                                        self.states[i % n_states]
                                    ),
                                ));
                            }
                            per_state[y].push(row);
                        }
                    }
                    stages.push(per_state);
                }
                Reward::ExpectedNextState(NextStateReward { stages })
            }
        };
        builder = builder.reward(reward);

        let terminal = match &self.terminal {
            TerminalFile::Keyword(word) if *word == same_as_reward() => Terminal::SameAsReward,
            TerminalFile::Keyword(word) => {
                return Err(FormatError::parse("terminal", format!("expected \"same-as-reward\" or a table, got `{word}`")))
            }
            TerminalFile::Table(table) => Terminal::Table(by_state(table, "terminal")?),
        };
        builder = builder.terminal(terminal);

        let (env, issues) = builder.build_with_report();
        report.extend(issues);
        Ok((env, report))
    }
}

/// Parses an environment file. The report lists model-level violations;
/// callers decide whether to reject.
pub fn read_env(text: &str) -> FormatResult<(EnvSpec, ValidationReport)> {
    from_json::<EnvFile>(text)?.into_env()
}

/// Pretty-printed environment file with a trailing newline.
pub fn write_env(env: &EnvSpec) -> String {
    let mut text = serde_json::to_string_pretty(&EnvFile::from_env(env)).expect("plain data");
    text.push('\n');
    text
}

/// SHA-256 of the compact serialization, independent of input layout.
pub fn env_hash(env: &EnvSpec) -> String {
    sha256_hex(serde_json::to_string(&EnvFile::from_env(env)).expect("plain data").as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coins::{build_coins_env, CoinsParams};
    use crate::validate::{IssueKind, Location};

    #[test]
    fn coins_round_trip() {
        let env = build_coins_env(&CoinsParams::standard()).unwrap();
        let text = write_env(&env);
        let (back, report) = read_env(&text).unwrap();
        assert!(report.is_empty(), "{report}");
        assert_eq!(back, env);
        assert_eq!(write_env(&back), text);
        assert_eq!(env_hash(&back), env_hash(&env));
    }

    #[test]
    fn decimal_strings_are_accepted() {
        let text = r#"{
            "states": ["a", "b"], "actions": ["go"], "horizon": 3,
            "kernel": {
                "stay_prob": { "a": { "go": ["0.1"] }, "b": { "go": [0.25, "0.5"] } },
                "jump_prob": { "a": { "go": { "b": "1" } }, "b": { "go": { "a": 1 } } }
            },
            "reward": { "kind": "current-state", "table": { "a": [1, "2.5"], "b": [-1] } },
            "terminal": { "a": [0], "b": ["0.125"] }
        }"#;
        let (env, report) = read_env(text).unwrap();
        assert!(report.is_empty(), "{report}");
        assert_eq!(env.stay_prob(0, 0, 0), 0.1);
        assert_eq!(env.stay_prob(1, 5, 0), 0.5);
        assert_eq!(env.terminal_reward(ExtendedState::new(1, 0)), 0.125);
        let (again, _) = read_env(&write_env(&env)).unwrap();
        assert_eq!(again, env);
    }

    #[test]
    fn explicit_transitions_report_forbidden_mass() {
        let text = r#"{
            "states": ["a", "b"], "actions": ["go"], "horizon": 2,
            "kernel": { "transitions": [
                { "state": "a", "age": 0, "action": "go",
                  "to": [ { "state": "a", "age": 1, "prob": 0.5 }, { "state": "b", "age": 2, "prob": 0.5 } ] },
                { "state": "b", "age": 0, "action": "go", "to": [ { "state": "a", "age": 0, "prob": 1 } ] }
            ] },
            "reward": { "kind": "current-state", "table": { "a": [0], "b": [0] } },
            "terminal": "same-as-reward"
        }"#;
        let (_, report) = read_env(text).unwrap();
        assert!(report.has(IssueKind::JumpAge, Location::Transition { x: 0, t: 0, a: 0, y: 1, s: 2 }), "{report}");
    }

    #[test]
    fn name_errors_are_located() {
        let text = r#"{
            "states": ["a"], "actions": ["go"], "horizon": 2,
            "kernel": { "stay_prob": { "a": { "stop": [1] } }, "jump_prob": { "a": { "go": {} } } },
            "reward": { "kind": "current-state", "table": { "a": [0] } },
            "terminal": "same-as-reward"
        }"#;
        let err = read_env(text).unwrap_err().to_string();
        assert!(err.contains("kernel.stay_prob.a") && err.contains("stop"), "{err}");
        let err = read_env(r#"{"states": ["a"], "actions": ["go"], "horizon": "x"}"#).unwrap_err().to_string();
        assert!(err.contains("horizon"), "{err}");
    }

    #[test]
    fn next_state_rewards_round_trip() {
        let env = EnvBuilder::with_sizes(2, 2, 2)
            .stay(0, 0, vec![0.3])
            .stay(0, 1, vec![0.6])
            .stay(1, 0, vec![1.0])
            .stay(1, 1, vec![0.1, 0.9])
            .jump(0, 0, vec![0.0, 1.0])
            .jump(0, 1, vec![0.0, 1.0])
            .jump(1, 0, vec![1.0, 0.0])
            .jump(1, 1, vec![1.0, 0.0])
            .admissible(1, vec![vec![0, 1], vec![1]])
            .reward(Reward::ExpectedNextState(NextStateReward {
                stages: vec![vec![vec![vec![1.0, 2.0, 3.0, 4.0]], vec![vec![0.5, -0.5, 0.25, 0.0]]]],
            }))
            .terminal(Terminal::Table(vec![vec![1.0, 2.0], vec![3.0]]))
            .build()
            .unwrap();
        let (back, report) = read_env(&write_env(&env)).unwrap();
        assert!(report.is_empty(), "{report}");
        assert_eq!(back, env);
    }
}
