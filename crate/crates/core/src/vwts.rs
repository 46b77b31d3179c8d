//! Varying weighted transition systems.
//!
//! Weights are stored densely per edge for every departure time in
//! `[0, table_horizon]`, so lookups during encoding are O(1).

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::mitl::{LabelSet, MitlError, TimedWord, WordEntry};
use crate::Time;

pub type StateId = usize;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum VwtsError {
    #[error("unknown state {0}")]
    UnknownState(StateId),
    #[error("no state named `{0}`")]
    UnknownStateName(String),
    #[error("duplicate state name `{0}`")]
    DuplicateState(String),
    #[error("edge ({from},{to}) declared twice")]
    DuplicateEdge { from: StateId, to: StateId },
    #[error("({from},{to}) is not an edge")]
    InvalidEdge { from: StateId, to: StateId },
    #[error("weight of ({from},{to}) at t={t} must be at least 1")]
    ZeroWeight { from: StateId, to: StateId, t: Time },
    #[error("weight of ({from},{to}) undefined at t={t}")]
    WeightUndefined { from: StateId, to: StateId, t: Time },
    #[error("path must start at the initial state")]
    NotInitial,
    #[error("path is empty")]
    EmptyPath,
    #[error("arrival at t={t} exceeds horizon {horizon}")]
    HorizonExceeded { t: Time, horizon: Time },
    #[error("horizon {requested} beyond the weight table's {table}")]
    HorizonBeyondTable { requested: Time, table: Time },
    #[error("system has no states")]
    NoStates,
    #[error(transparent)]
    Word(#[from] MitlError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub name: String,
    pub labels: LabelSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: StateId,
    pub to: StateId,
}

/// Weight specification of one edge: an optional default plus inclusive
/// `[from_t, to_t]` windows; later windows override earlier ones.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeWeights {
    pub default: Option<u32>,
    pub windows: Vec<(Time, Time, u32)>,
}

impl EdgeWeights {
    pub fn constant(w: u32) -> Self {
        EdgeWeights { default: Some(w), windows: Vec::new() }
    }

    pub fn window(mut self, from_t: Time, to_t: Time, w: u32) -> Self {
        self.windows.push((from_t, to_t, w));
        self
    }

    fn at(&self, t: Time) -> Option<u32> {
        self.windows.iter().rev().find(|&&(a, b, _)| a <= t && t <= b).map(|&(_, _, w)| w).or(self.default)
    }
}

#[derive(Clone, Debug)]
pub struct VwtsBuilder {
    table_horizon: Time,
    states: Vec<State>,
    initial: StateId,
    edges: Vec<(Edge, EdgeWeights)>,
}

impl VwtsBuilder {
    /// Weights will be tabulated for departures in `[0, table_horizon]`.
    pub fn new(table_horizon: Time) -> Self {
        VwtsBuilder { table_horizon: table_horizon.max(0), states: Vec::new(), initial: 0, edges: Vec::new() }
    }

    pub fn state<I, S>(&mut self, name: impl Into<String>, labels: I) -> StateId
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.states.push(State { name: name.into(), labels: labels.into_iter().map(Into::into).collect() });
        self.states.len() - 1
    }

    pub fn initial(&mut self, s: StateId) -> &mut Self {
        self.initial = s;
        self
    }

    pub fn edge(&mut self, from: StateId, to: StateId, weights: EdgeWeights) -> &mut Self {
        self.edges.push((Edge { from, to }, weights));
        self
    }

    pub fn edge_both(&mut self, a: StateId, b: StateId, weights: EdgeWeights) -> &mut Self {
        self.edge(a, b, weights.clone());
        if a != b {
            self.edge(b, a, weights);
        }
        self
    }

    pub fn build(self) -> Result<Vwts, VwtsError> {
        let n = self.states.len();
        if n == 0 {
            return Err(VwtsError::NoStates);
        }
        if self.initial >= n {
            return Err(VwtsError::UnknownState(self.initial));
        }
        let mut names = BTreeSet::new();
        for s in &self.states {
            if !names.insert(s.name.as_str()) {
                return Err(VwtsError::DuplicateState(s.name.clone()));
            }
        }
        let len = self.table_horizon as usize + 1;
        let mut edges = Vec::new();
        let mut weights = Vec::new();
        let mut seen = BTreeSet::new();
        for (e, spec) in &self.edges {
            for s in [e.from, e.to] {
                if s >= n {
                    return Err(VwtsError::UnknownState(s));
                }
            }
            if !seen.insert((e.from, e.to)) {
                return Err(VwtsError::DuplicateEdge { from: e.from, to: e.to });
            }
            let mut table = Vec::with_capacity(len);
            for t in 0..len as Time {
                let w = spec.at(t).ok_or(VwtsError::WeightUndefined { from: e.from, to: e.to, t })?;
                if w == 0 {
                    return Err(VwtsError::ZeroWeight { from: e.from, to: e.to, t });
                }
                table.push(w);
            }
            edges.push(*e);
            weights.push(table);
        }
        for s in 0..n {
            if seen.insert((s, s)) {
                edges.push(Edge { from: s, to: s });
                weights.push(vec![1; len]);
            }
        }
        Ok(Vwts::assemble(self.states, self.initial, edges, weights, self.table_horizon))
    }
}

/// `(S, s0, δ, Π, L, Δ)` with `Δ` tabulated on `[0, table_horizon]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vwts {
    states: Vec<State>,
    initial: StateId,
    edges: Vec<Edge>,
    weights: Vec<Vec<u32>>,
    adj: Vec<Vec<usize>>,
    table_horizon: Time,
}

impl Vwts {
    fn assemble(
        states: Vec<State>,
        initial: StateId,
        edges: Vec<Edge>,
        weights: Vec<Vec<u32>>,
        table_horizon: Time,
    ) -> Self {
        let mut adj = vec![Vec::new(); states.len()];
        for (i, e) in edges.iter().enumerate() {
            adj[e.from].push(i);
        }
        for list in &mut adj {
            list.sort_by_key(|&i| edges[i].to);
        }
        Vwts { states, initial, edges, weights, adj, table_horizon }
    }

    /// Builds a system from explicit weight functions. `weight(e, t)` is
    /// called for every edge index and every `t` in `[0, table_horizon]`;
    /// no self-loops are added implicitly.
    pub fn from_fn(
        states: Vec<State>,
        initial: StateId,
        edges: Vec<Edge>,
        table_horizon: Time,
        mut weight: impl FnMut(usize, Time) -> Option<u32>,
    ) -> Result<Self, VwtsError> {
        if states.is_empty() {
            return Err(VwtsError::NoStates);
        }
        if initial >= states.len() {
            return Err(VwtsError::UnknownState(initial));
        }
        let mut seen = BTreeSet::new();
        let mut weights = Vec::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            for s in [e.from, e.to] {
                if s >= states.len() {
                    return Err(VwtsError::UnknownState(s));
                }
            }
            if !seen.insert((e.from, e.to)) {
                return Err(VwtsError::DuplicateEdge { from: e.from, to: e.to });
            }
            let mut table = Vec::with_capacity(table_horizon as usize + 1);
            for t in 0..=table_horizon {
                let w = weight(i, t).ok_or(VwtsError::WeightUndefined { from: e.from, to: e.to, t })?;
                if w == 0 {
                    return Err(VwtsError::ZeroWeight { from: e.from, to: e.to, t });
                }
                table.push(w);
            }
            weights.push(table);
        }
        Ok(Vwts::assemble(states, initial, edges, weights, table_horizon))
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, s: StateId) -> Result<&State, VwtsError> {
        self.states.get(s).ok_or(VwtsError::UnknownState(s))
    }

    pub fn state_id(&self, name: &str) -> Result<StateId, VwtsError> {
        self.states.iter().position(|s| s.name == name).ok_or_else(|| VwtsError::UnknownStateName(name.into()))
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn table_horizon(&self) -> Time {
        self.table_horizon
    }

    pub fn labels(&self, s: StateId) -> &LabelSet {
        &self.states[s].labels
    }

    /// All atoms appearing in some label.
    pub fn atoms(&self) -> BTreeSet<&str> {
        self.states.iter().flat_map(|s| s.labels.iter().map(String::as_str)).collect()
    }

    /// `Adj(s)`, sorted by state id.
    pub fn adjacency(&self, s: StateId) -> Result<Vec<StateId>, VwtsError> {
        let list = self.adj.get(s).ok_or(VwtsError::UnknownState(s))?;
        Ok(list.iter().map(|&i| self.edges[i].to).collect())
    }

    /// Indices into [`Vwts::edges`] of the edges leaving `s`, sorted by target.
    pub fn out_edges(&self, s: StateId) -> &[usize] {
        &self.adj[s]
    }

    pub fn edge_index(&self, from: StateId, to: StateId) -> Option<usize> {
        self.adj.get(from)?.iter().copied().find(|&i| self.edges[i].to == to)
    }

    /// `Δ(from, t, to)`; `None` if the edge does not exist or `t` lies outside
    /// the table.
    pub fn delta(&self, from: StateId, t: Time, to: StateId) -> Option<u32> {
        let e = self.edge_index(from, to)?;
        self.edge_weight(e, t)
    }

    pub fn edge_weight(&self, edge: usize, t: Time) -> Option<u32> {
        if t < 0 {
            return None;
        }
        self.weights.get(edge)?.get(t as usize).copied()
    }

    /// Replaces `Δ` of one edge at one departure time.
    pub fn set_edge_weight(&mut self, edge: usize, t: Time, w: u32) -> Result<(), VwtsError> {
        let e = *self.edges.get(edge).ok_or(VwtsError::UnknownState(edge))?;
        if w == 0 {
            return Err(VwtsError::ZeroWeight { from: e.from, to: e.to, t });
        }
        let slot = (t >= 0)
            .then(|| self.weights[edge].get_mut(t as usize))
            .flatten()
            .ok_or(VwtsError::HorizonBeyondTable { requested: t, table: self.table_horizon })?;
        *slot = w;
        Ok(())
    }

    /// Time sequence `t_0 = 0, t_i = t_{i-1} + Δ(s_{i-1}, t_{i-1}, s_i)`.
    pub fn time_sequence(&self, path: &Path, horizon: Time) -> Result<TimeSequence, VwtsError> {
        let states = path.states();
        let first = *states.first().ok_or(VwtsError::EmptyPath)?;
        if first != self.initial {
            return Err(VwtsError::NotInitial);
        }
        if horizon > self.table_horizon {
            return Err(VwtsError::HorizonBeyondTable { requested: horizon, table: self.table_horizon });
        }
        let mut times = Vec::with_capacity(states.len());
        let mut t: Time = 0;
        times.push(t);
        for pair in states.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let e = self.edge_index(a, b).ok_or(VwtsError::InvalidEdge { from: a, to: b })?;
            let w = self.edge_weight(e, t).ok_or(VwtsError::WeightUndefined { from: a, to: b, t })?;
            t += w as Time;
            if t > horizon {
                return Err(VwtsError::HorizonExceeded { t, horizon });
            }
            times.push(t);
        }
        Ok(TimeSequence(times))
    }

    /// `σ(s) = (L(s_0), t_0), (L(s_1), t_1), ...`, defined up to `horizon`.
    pub fn timed_word(&self, path: &Path, horizon: Time) -> Result<TimedWord, VwtsError> {
        let times = self.time_sequence(path, horizon)?;
        self.word_from(path.states(), times.as_slice(), horizon)
    }

    pub(crate) fn word_from(&self, states: &[StateId], times: &[Time], horizon: Time) -> Result<TimedWord, VwtsError> {
        let entries = states
            .iter()
            .zip(times)
            .map(|(&s, &t)| WordEntry { labels: self.states[s].labels.clone(), time: t })
            .collect();
        Ok(TimedWord::new(entries, horizon)?)
    }

    /// Copy of this system extended with an extra unreachable state.
    pub fn with_isolated_state(&self, name: impl Into<String>, labels: LabelSet) -> Self {
        let mut states = self.states.clone();
        states.push(State { name: name.into(), labels });
        let mut edges = self.edges.clone();
        let mut weights = self.weights.clone();
        let s = states.len() - 1;
        edges.push(Edge { from: s, to: s });
        weights.push(vec![1; self.table_horizon as usize + 1]);
        Vwts::assemble(states, self.initial, edges, weights, self.table_horizon)
    }
}

/// A state sequence `s_0 ... s_n`; validity is checked against a system.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(Vec<StateId>);

impl Path {
    pub fn new(ts: &Vwts, states: Vec<StateId>) -> Result<Self, VwtsError> {
        let first = *states.first().ok_or(VwtsError::EmptyPath)?;
        if first != ts.initial() {
            return Err(VwtsError::NotInitial);
        }
        for pair in states.windows(2) {
            if pair[0] >= ts.num_states() {
                return Err(VwtsError::UnknownState(pair[0]));
            }
            if ts.edge_index(pair[0], pair[1]).is_none() {
                return Err(VwtsError::InvalidEdge { from: pair[0], to: pair[1] });
            }
        }
        Ok(Path(states))
    }

    pub fn states(&self) -> &[StateId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TimeSequence(Vec<Time>);

impl TimeSequence {
    pub fn as_slice(&self) -> &[Time] {
        &self.0
    }

    pub fn last(&self) -> Time {
        *self.0.last().expect("time sequences are nonempty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_state() -> Vwts {
        let mut b = VwtsBuilder::new(10);
        let a = b.state("a", ["x"]);
        let c = b.state("b", [""; 0]);
        b.state("c", ["y"]);
        b.edge_both(a, c, EdgeWeights::constant(2).window(3, 4, 5));
        b.build().unwrap()
    }

    #[test]
    fn self_loops_default_to_unit_weight() {
        let ts = three_state();
        for s in 0..3 {
            assert_eq!(ts.delta(s, 7, s), Some(1));
        }
        assert_eq!(ts.adjacency(2).unwrap(), vec![2]);
        assert_eq!(ts.adjacency(0).unwrap(), vec![0, 1]);
        assert!(ts.adjacency(9).is_err());
    }

    #[test]
    fn windows_override_default() {
        let ts = three_state();
        assert_eq!(ts.delta(0, 2, 1), Some(2));
        assert_eq!(ts.delta(0, 3, 1), Some(5));
        assert_eq!(ts.delta(1, 4, 0), Some(5));
        assert_eq!(ts.delta(0, 11, 1), None);
    }

    #[test]
    fn time_sequence_follows_departure_weights() {
        let ts = three_state();
        let p = Path::new(&ts, vec![0, 0, 0, 1, 0]).unwrap();
        assert_eq!(ts.time_sequence(&p, 10).unwrap().as_slice(), &[0, 1, 2, 4, 9]);
        assert!(matches!(ts.time_sequence(&p, 8), Err(VwtsError::HorizonExceeded { t: 9, horizon: 8 })));
        assert_eq!(ts.time_sequence(&Path::new(&ts, vec![0]).unwrap(), 0).unwrap().as_slice(), &[0]);
    }

    #[test]
    fn invalid_paths_rejected() {
        let ts = three_state();
        assert_eq!(Path::new(&ts, vec![]), Err(VwtsError::EmptyPath));
        assert_eq!(Path::new(&ts, vec![1]), Err(VwtsError::NotInitial));
        assert_eq!(Path::new(&ts, vec![0, 2]), Err(VwtsError::InvalidEdge { from: 0, to: 2 }));
    }

    #[test]
    fn builder_validation() {
        let mut b = VwtsBuilder::new(3);
        let a = b.state("a", [""; 0]);
        b.edge(a, a, EdgeWeights::default().window(0, 1, 1));
        assert!(matches!(b.build(), Err(VwtsError::WeightUndefined { t: 2, .. })));
        let mut b = VwtsBuilder::new(3);
        let a = b.state("a", [""; 0]);
        b.edge(a, a, EdgeWeights::constant(0));
        assert!(matches!(b.build(), Err(VwtsError::ZeroWeight { .. })));
        let mut b = VwtsBuilder::new(3);
        b.state("a", [""; 0]);
        b.state("a", [""; 0]);
        assert!(matches!(b.build(), Err(VwtsError::DuplicateState(_))));
    }
}
