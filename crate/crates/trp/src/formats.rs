//! JSON environment, MDP and output formats.
//!
//! Environment file (deterministic durations):
//!
//! ```json
//! {
//!   "states": [{"id": "s0", "labels": ["exit"]}, {"id": "s1"}],
//!   "initial": "s0",
//!   "edges": [
//!     {"from": "s0", "to": "s1", "weights": 3, "bidirectional": true},
//!     {"from": "s1", "to": "s0", "weights": [{"from_t": 0, "to_t": 9, "w": 2}], "default": 4}
//!   ]
//! }
//! ```
//!
//! MDP file (stochastic durations):
//!
//! ```json
//! {
//!   "horizon": 12,
//!   "states": [{"id": "s0"}, {"id": "s1", "labels": ["a"]}],
//!   "initial": "s0",
//!   "edges": [
//!     {"from": "s0", "to": "s1", "default": [{"dt": 1, "p": 0.5}, {"dt": 2, "p": 0.5}],
//!      "delays": [{"from_t": 4, "to_t": 6, "outcomes": [{"dt": 3, "p": 1.0}]}]}
//!   ]
//! }
//! ```
//!
//! States without a declared self-loop get a unit-duration one in both
//! formats.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use trp_core::mdp::{DelayWindow, LabeledMdp, MdpEdge, MdpError, Outcome, TraceDisplay};
use trp_core::mitl::{self, MitlError, Score, TaskSet};
use trp_core::vwts::{EdgeWeights, State, StateId, VwtsBuilder, VwtsError};
use trp_core::{Time, Vwts};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("no horizon given and none in the file")]
    MissingHorizon,
    #[error(transparent)]
    Vwts(#[from] VwtsError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Mitl(#[from] MitlError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub id: String,
    #[serde(default)]
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightWindow {
    pub from_t: Time,
    pub to_t: Time,
    pub w: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Constant(u32),
    Windows(Vec<WeightWindow>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvEdge {
    pub from: String,
    pub to: String,
    pub weights: WeightSpec,
    /// Weight outside every window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<u32>,
    #[serde(default)]
    pub bidirectional: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Time>,
    pub states: Vec<StateSpec>,
    pub initial: String,
    pub edges: Vec<EnvEdge>,
}

fn index_states(states: &[StateSpec]) -> BTreeMap<&str, StateId> {
    states.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect()
}

fn lookup(ids: &BTreeMap<&str, StateId>, name: &str) -> Result<StateId, FormatError> {
    ids.get(name).copied().ok_or_else(|| FormatError::UnknownState(name.to_string()))
}

impl EnvFile {
    /// Weights are tabulated on `[0, max(horizon, file horizon)]`.
    pub fn build(&self, horizon: Option<Time>) -> Result<Vwts, FormatError> {
        let table = horizon.into_iter().chain(self.horizon).max().ok_or(FormatError::MissingHorizon)?;
        let ids = index_states(&self.states);
        let mut b = VwtsBuilder::new(table);
        for s in &self.states {
            b.state(s.id.clone(), s.labels.iter().cloned());
        }
        b.initial(lookup(&ids, &self.initial)?);
        for e in &self.edges {
            let (from, to) = (lookup(&ids, &e.from)?, lookup(&ids, &e.to)?);
            let w = match &e.weights {
                WeightSpec::Constant(w) => EdgeWeights::constant(*w),
                WeightSpec::Windows(ws) => ws
                    .iter()
                    .fold(EdgeWeights { default: e.default, windows: Vec::new() }, |acc, x| acc.window(x.from_t, x.to_t, x.w)),
            };
            if e.bidirectional {
                b.edge_both(from, to, w);
            } else {
                b.edge(from, to, w);
            }
        }
        Ok(b.build()?)
    }
}

pub fn load_env(text: &str, horizon: Option<Time>) -> Result<Vwts, FormatError> {
    let file: EnvFile = serde_json::from_str(text)?;
    file.build(horizon)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpec {
    pub dt: u32,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub from_t: Time,
    pub to_t: Time,
    pub outcomes: Vec<OutcomeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpEdgeSpec {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Vec<OutcomeSpec>>,
    #[serde(default)]
    pub delays: Vec<DelaySpec>,
    #[serde(default)]
    pub bidirectional: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Time>,
    pub states: Vec<StateSpec>,
    pub initial: String,
    pub edges: Vec<MdpEdgeSpec>,
}

fn outcomes(spec: &[OutcomeSpec]) -> Vec<Outcome> {
    spec.iter().map(|o| Outcome { dt: o.dt, p: o.p }).collect()
}

impl MdpFile {
    /// `horizon` overrides the file's; windows are clipped to it.
    pub fn build(&self, horizon: Option<Time>) -> Result<LabeledMdp, FormatError> {
        let horizon = horizon.or(self.horizon).ok_or(FormatError::MissingHorizon)?;
        let ids = index_states(&self.states);
        let states: Vec<State> =
            self.states.iter().map(|s| State { name: s.id.clone(), labels: s.labels.iter().cloned().collect() }).collect();
        let mut edges = Vec::new();
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            let (from, to) = (lookup(&ids, &e.from)?, lookup(&ids, &e.to)?);
            let mut me = MdpEdge::new(from, to);
            me.default = e.default.as_deref().map(outcomes);
            for d in &e.delays {
                if d.from_t > horizon || d.to_t < 0 || d.from_t > d.to_t {
                    if d.from_t > d.to_t || d.from_t < 0 {
                        return Err(MdpError::BadWindow { from, to, from_t: d.from_t, to_t: d.to_t }.into());
                    }
                    continue;
                }
                me.delays.push(DelayWindow { from_t: d.from_t, to_t: d.to_t.min(horizon), outcomes: outcomes(&d.outcomes) });
            }
            if e.bidirectional && from != to {
                let mut back = me.clone();
                back.from = to;
                back.to = from;
                seen.insert((to, from));
                edges.push(back);
            }
            seen.insert((from, to));
            edges.push(me);
        }
        for s in 0..states.len() {
            if seen.insert((s, s)) {
                edges.push(MdpEdge::deterministic(s, s, 1));
            }
        }
        let initial = lookup(&ids, &self.initial)?;
        Ok(LabeledMdp::new(states, initial, edges, horizon)?)
    }
}

pub fn load_mdp(text: &str, horizon: Option<Time>) -> Result<LabeledMdp, FormatError> {
    let file: MdpFile = serde_json::from_str(text)?;
    file.build(horizon)
}

pub fn load_tasks(text: &str) -> Result<TaskSet, FormatError> {
    Ok(mitl::parse_task_file(text)?)
}

/// `"3"` or `"-7/2"`.
pub fn score_text(s: &Score) -> String {
    if *s.denom() == 1 {
        s.numer().to_string()
    } else {
        format!("{}/{}", s.numer(), s.denom())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordEntryOut {
    pub t: Time,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskOut {
    pub formula: String,
    pub priority: String,
    pub robustness: i64,
}

/// Result of `plan-vwts`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VwtsPlanOut {
    pub status: String,
    pub horizon: Time,
    pub tprime: Time,
    pub variant: String,
    pub path: Vec<String>,
    pub times: Vec<Time>,
    pub word: Vec<WordEntryOut>,
    pub tasks: Vec<TaskOut>,
    /// Exact weighted robustness as a decimal or fraction.
    pub objective: String,
    pub objective_f64: f64,
    pub bound: Option<f64>,
    pub lpvars: usize,
    pub lpconst: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryOut {
    pub step: usize,
    /// Probability of reaching this history under the strategy.
    pub reach: f64,
    pub actions: BTreeMap<String, f64>,
}

/// Result of `plan-mdp` and `plan-receding`: a history-dependent strategy
/// keyed by trace in `s@t` notation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyOut {
    pub mode: String,
    pub horizon: Time,
    pub cut: Time,
    pub tprime: Time,
    pub variant: String,
    /// LP optimum: the expected weighted robustness, or its worst-case
    /// lower bound for receding plans.
    pub objective: f64,
    /// Value of the reach-weighted memoryless projection of the strategy.
    pub memoryless_value: f64,
    pub histories: usize,
    pub lpvars: usize,
    pub lpconst: usize,
    pub strategy: BTreeMap<String, HistoryOut>,
}

/// One simulated execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceOut {
    pub run: usize,
    pub seed: u64,
    pub trace: String,
    pub robustness: Vec<i64>,
    pub realized: String,
    pub realized_f64: f64,
    /// Lower bound of every replanning, first to last. Empty without
    /// receding horizon.
    pub bounds: Vec<f64>,
}

/// Replanning log line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplanOut {
    pub run: usize,
    pub step: usize,
    pub pinned: String,
    pub cut: Time,
    pub bound: f64,
    pub histories: usize,
    pub wall_secs: Option<f64>,
}

pub fn trace_text(mdp: &LabeledMdp, trace: &[(StateId, Time)]) -> String {
    TraceDisplay(mdp, trace).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    const ENV: &str = r#"{
        "states": [{"id": "a", "labels": ["x"]}, {"id": "b"}],
        "initial": "a",
        "edges": [
            {"from": "a", "to": "b", "weights": 2, "bidirectional": true},
            {"from": "b", "to": "b", "weights": [{"from_t": 0, "to_t": 3, "w": 2}], "default": 1}
        ]
    }"#;

    #[test]
    fn env_roundtrip() {
        let ts = load_env(ENV, Some(6)).unwrap();
        assert_eq!(ts.num_states(), 2);
        let (a, b) = (ts.state_id("a").unwrap(), ts.state_id("b").unwrap());
        assert_eq!(ts.delta(a, 0, b), Some(2));
        assert_eq!(ts.delta(b, 5, a), Some(2));
        assert_eq!(ts.delta(b, 2, b), Some(2));
        assert_eq!(ts.delta(b, 4, b), Some(1));
        assert_eq!(ts.delta(a, 4, a), Some(1));
    }

    #[test]
    fn env_errors() {
        assert!(matches!(load_env(ENV, None), Err(FormatError::MissingHorizon)));
        let bad = ENV.replace("\"initial\": \"a\"", "\"initial\": \"zz\"");
        assert!(matches!(load_env(&bad, Some(3)), Err(FormatError::UnknownState(_))));
        let gap = ENV.replace(", \"default\": 1", "");
        assert!(matches!(load_env(&gap, Some(6)), Err(FormatError::Vwts(VwtsError::WeightUndefined { .. }))));
        assert!(matches!(load_env("{", Some(3)), Err(FormatError::Json(_))));
    }

    const MDP: &str = r#"{
        "horizon": 6,
        "states": [{"id": "s0"}, {"id": "s1", "labels": ["a"]}],
        "initial": "s0",
        "edges": [
            {"from": "s0", "to": "s1", "default": [{"dt": 1, "p": 0.25}, {"dt": 2, "p": 0.75}],
             "delays": [{"from_t": 3, "to_t": 9, "outcomes": [{"dt": 3, "p": 1.0}]}], "bidirectional": true}
        ]
    }"#;

    #[test]
    fn mdp_roundtrip() {
        let mdp = load_mdp(MDP, None).unwrap();
        assert_eq!(mdp.horizon(), 6);
        assert_eq!(mdp.edges().len(), 4);
        assert!((mdp.probability(0, 0, 1, 1, 2) - 0.75).abs() < 1e-15);
        let e = mdp.out_edges(1).iter().copied().find(|&e| mdp.edges()[e].to == 0).unwrap();
        assert_eq!(mdp.outcomes(e, 4), &[Outcome { dt: 3, p: 1.0 }]);
        let short = load_mdp(MDP, Some(2)).unwrap();
        assert_eq!(short.horizon(), 2);
    }

    #[test]
    fn mdp_probabilities_checked() {
        let bad = MDP.replace("0.75", "0.5");
        assert!(matches!(load_mdp(&bad, None), Err(FormatError::Mdp(MdpError::NotNormalized { .. }))));
    }

    #[test]
    fn score_formatting() {
        assert_eq!(score_text(&Score::new(6, 2)), "3");
        assert_eq!(score_text(&Score::new(-7, 2)), "-7/2");
    }
}
