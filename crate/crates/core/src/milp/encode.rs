//! Builds the maximum-robustness planning MILP for a [`Vwts`] and a
//! [`TaskSet`].
//!
//! Occupancy is a binary `b[s][t]` per state and time step. Each formula is
//! turned into a signal of literals over the encoded time range, where a
//! literal is either a constant or an affine expression that takes values
//! in `{0, 1}` at every integral occupancy. Constants are folded eagerly so
//! the fictive pre-history and clipped windows cost no variables.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::model::{Cmp, LinExpr, MilpModel, ModelError, ObjSense, VarId, VarKind};
use crate::mitl::{Formula, MitlError, RobustnessVariant, TaskSet, UntilMode};
use crate::vwts::{StateId, Vwts};
use crate::Time;

/// How consecutive occupied pairs are tied together.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TransitionEncoding {
    /// A binary per `(s, t, s′)` selecting the transition taken from each
    /// occupied pair. Exact: the occupied pairs are precisely one timed path.
    #[default]
    EdgeSelect,
    /// Occupancy only: every occupied pair has between one and at most one
    /// occupied successor arrival. Cheaper, but it also rejects paths that
    /// later visit a successor arrival of an earlier pair through a
    /// different route.
    OccupancyOnly,
}

/// How the label of the most recently occupied state is selected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum AtomEncoding {
    /// One indicator per state and step tracking the last occupied state.
    #[default]
    LastOccupied,
    /// The idle counter `q`, its complement `q̃ = t - q`, and one-hot
    /// selectors over all candidate indices of `q̃`.
    IndexSelect,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodingConfig {
    /// Planning horizon `T`.
    pub horizon: Time,
    /// Longest backward shift `T′` counted by right robustness.
    pub tprime: Time,
    /// Overrides the default big-M of `T + T′ + 1`.
    pub big_m: Option<i64>,
    pub variant: RobustnessVariant,
    pub until_mode: UntilMode,
    pub atoms: AtomEncoding,
    pub transitions: TransitionEncoding,
    /// Skip occupancy variables for `(s, t)` pairs unreachable from `(s0, 0)`.
    pub prune: bool,
    /// Declare formula and counter variables continuous. Their constraints
    /// pin them to integers whenever the occupancy is integral.
    pub relax_derived: bool,
}

impl EncodingConfig {
    pub fn new(horizon: Time, tprime: Time) -> Self {
        EncodingConfig {
            horizon,
            tprime,
            big_m: None,
            variant: RobustnessVariant::Right,
            until_mode: UntilMode::Strict,
            atoms: AtomEncoding::LastOccupied,
            transitions: TransitionEncoding::EdgeSelect,
            prune: true,
            relax_derived: true,
        }
    }

    pub fn with_variant(mut self, variant: RobustnessVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn big_m(&self) -> i64 {
        self.big_m.unwrap_or(self.horizon + self.tprime + 1)
    }

    /// First encoded time step: `-T′` when right robustness is involved.
    pub fn first_time(&self) -> Time {
        match self.variant {
            RobustnessVariant::Left => 0,
            _ => -self.tprime,
        }
    }

    pub fn validate(&self) -> Result<(), EncodeError> {
        if self.horizon < 1 {
            return Err(EncodeError::HorizonTooSmall { horizon: self.horizon, required: 1 });
        }
        if self.tprime < 0 {
            return Err(EncodeError::NegativeTPrime(self.tprime));
        }
        let required = self.horizon + self.tprime + 1;
        if self.big_m() < required {
            return Err(EncodeError::BigMTooSmall { big_m: self.big_m(), required });
        }
        Ok(())
    }

    fn derived_kind(&self) -> VarKind {
        if self.relax_derived {
            VarKind::Continuous
        } else {
            VarKind::Binary
        }
    }

    fn counter_kind(&self) -> VarKind {
        if self.relax_derived {
            VarKind::Continuous
        } else {
            VarKind::Integer
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EncodeError {
    #[error("horizon {horizon} too small, need at least {required}")]
    HorizonTooSmall { horizon: Time, required: Time },
    #[error("T′ must be nonnegative, got {0}")]
    NegativeTPrime(Time),
    #[error("big-M {big_m} below the required {required}")]
    BigMTooSmall { big_m: i64, required: i64 },
    #[error("weights are tabulated up to {table} but the horizon is {horizon}")]
    TableTooShort { horizon: Time, table: Time },
    #[error(transparent)]
    Formula(#[from] MitlError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Non-fatal remarks collected while encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EncodeWarning {
    /// Left robustness reads the task at late steps whose windows are
    /// clipped at the horizon.
    ClippedWindows { task: usize, task_horizon: Time, horizon: Time },
}

/// A `{0,1}`-valued quantity in the model.
#[derive(Clone, Debug, PartialEq)]
pub enum Lit {
    Const(bool),
    Expr(LinExpr),
}

impl Lit {
    fn from_expr(e: LinExpr) -> Lit {
        let e = e.normalized();
        if e.terms.is_empty() {
            Lit::Const(e.constant > 0.5)
        } else {
            Lit::Expr(e)
        }
    }

    pub fn expr(&self) -> LinExpr {
        match self {
            Lit::Const(b) => LinExpr::constant(if *b { 1.0 } else { 0.0 }),
            Lit::Expr(e) => e.clone(),
        }
    }

    pub fn negate(&self) -> Lit {
        match self {
            Lit::Const(b) => Lit::Const(!b),
            Lit::Expr(e) => {
                let mut n = LinExpr::constant(1.0);
                n.add_expr(e, -1.0);
                Lit::Expr(n)
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Lit::Const(b) => f64::from(u8::from(*b)),
            Lit::Expr(e) => e.eval(x),
        }
    }
}

fn sum(a: &LinExpr, b: &LinExpr, kb: f64) -> LinExpr {
    let mut out = a.clone();
    out.add_expr(b, kb);
    out
}

/// Occupancy binaries `b[s][t]` for `t ∈ [0, T]`; `None` marks pairs fixed
/// to zero by reachability pruning.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupancy {
    pub horizon: Time,
    b: Vec<Vec<Option<VarId>>>,
}

impl Occupancy {
    pub fn var(&self, s: StateId, t: Time) -> Option<VarId> {
        if t < 0 || t > self.horizon {
            return None;
        }
        self.b.get(s)?.get(t as usize).copied().flatten()
    }

    pub fn num_states(&self) -> usize {
        self.b.len()
    }

    /// `Σ_s b[s][t]`.
    pub fn occupied(&self, t: Time) -> LinExpr {
        let mut e = LinExpr::new();
        for s in 0..self.b.len() {
            if let Some(v) = self.var(s, t) {
                e.add_term(v, 1.0);
            }
        }
        e
    }

    /// `Σ_{s ∈ states} b[s][t]`.
    fn occupied_among(&self, states: &[StateId], t: Time) -> LinExpr {
        let mut e = LinExpr::new();
        for &s in states {
            if let Some(v) = self.var(s, t) {
                e.add_term(v, 1.0);
            }
        }
        e
    }
}

/// `(s, t)` pairs reachable from `(s0, 0)` along timed transitions that
/// arrive no later than `horizon`.
pub fn reachable(ts: &Vwts, horizon: Time) -> Vec<Vec<bool>> {
    let n = ts.num_states();
    let len = horizon as usize + 1;
    let mut reach = vec![vec![false; len]; n];
    reach[ts.initial()][0] = true;
    for t in 0..=horizon {
        for s in 0..n {
            if !reach[s][t as usize] {
                continue;
            }
            for &e in ts.out_edges(s) {
                let Some(w) = ts.edge_weight(e, t) else { continue };
                let arr = t + w as Time;
                if arr <= horizon {
                    reach[ts.edges()[e].to][arr as usize] = true;
                }
            }
        }
    }
    reach
}

/// Declares occupancy and the transition constraints.
///
/// With [`TransitionEncoding::EdgeSelect`] the occupied pairs form exactly
/// one timed path from `(s0, 0)`: every occupied pair takes exactly one
/// transition unless no successor arrives within the horizon, and every
/// occupied pair after time 0 is the arrival of a taken transition.
pub fn encode_ts(ts: &Vwts, cfg: &EncodingConfig, model: &mut MilpModel) -> Result<Occupancy, EncodeError> {
    cfg.validate()?;
    let horizon = cfg.horizon;
    if ts.table_horizon() < horizon {
        return Err(EncodeError::TableTooShort { horizon, table: ts.table_horizon() });
    }
    let n = ts.num_states();
    let len = horizon as usize + 1;
    let reach = if cfg.prune { reachable(ts, horizon) } else { vec![vec![true; len]; n] };
    let mut b = vec![vec![None; len]; n];
    for (s, row) in b.iter_mut().enumerate() {
        for t in 0..len {
            if reach[s][t] {
                row[t] = Some(model.binary(format!("b_{s}_{t}")));
            }
        }
    }
    let occ = Occupancy { horizon, b };

    let s0 = ts.initial();
    let start = occ.var(s0, 0).expect("initial pair is always declared");
    model.add_constraint("init", LinExpr::var(start), Cmp::Eq, 1.0);

    for t in 0..=horizon {
        let e = occ.occupied(t);
        if e.terms.len() > 1 {
            model.add_constraint(format!("one_{t}"), e, Cmp::Le, 1.0);
        }
    }

    let mut preds: Vec<Vec<LinExpr>> = vec![vec![LinExpr::new(); len]; n];
    for s in 0..n {
        for t in 0..=horizon {
            let Some(v) = occ.var(s, t) else { continue };
            let mut succ = LinExpr::new();
            for &e in ts.out_edges(s) {
                let Some(w) = ts.edge_weight(e, t) else { continue };
                let to = ts.edges()[e].to;
                let arr = t + w as Time;
                let Some(u) = occ.var(to, arr) else { continue };
                match cfg.transitions {
                    TransitionEncoding::EdgeSelect => {
                        let y = model.binary(format!("y_{s}_{t}_{to}"));
                        model.add_constraint(format!("take_{s}_{t}_{to}"), LinExpr::var(y).term(u, -1.0), Cmp::Le, 0.0);
                        succ.add_term(y, 1.0);
                        preds[to][arr as usize].add_term(y, 1.0);
                    }
                    TransitionEncoding::OccupancyOnly => {
                        succ.add_term(u, 1.0);
                        preds[to][arr as usize].add_term(v, 1.0);
                    }
                }
            }
            if succ.terms.is_empty() {
                continue;
            }
            let mut need = succ.clone();
            need.add_term(v, -1.0);
            match cfg.transitions {
                TransitionEncoding::EdgeSelect => {
                    model.add_constraint(format!("next_{s}_{t}"), need, Cmp::Eq, 0.0);
                }
                TransitionEncoding::OccupancyOnly => {
                    model.add_constraint(format!("next_{s}_{t}"), need, Cmp::Ge, 0.0);
                    if succ.terms.len() > 1 {
                        model.add_constraint(format!("nextmax_{s}_{t}"), succ, Cmp::Le, 1.0);
                    }
                }
            }
        }
    }
    for (s, row) in preds.into_iter().enumerate() {
        for (t, p) in row.into_iter().enumerate().skip(1) {
            let Some(v) = occ.var(s, t as Time) else { continue };
            let mut e = p;
            e.add_term(v, -1.0);
            model.add_constraint(format!("arr_{s}_{t}"), e, Cmp::Ge, 0.0);
        }
    }
    Ok(occ)
}

/// Idle counter `q[t]`: steps since the last occupied one. `q̃[t] = t - q[t]`
/// is the index of the last occupied step.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTracking {
    q: Vec<LinExpr>,
}

impl LabelTracking {
    pub fn q(&self, t: Time) -> &LinExpr {
        &self.q[t as usize]
    }

    pub fn q_tilde(&self, t: Time) -> LinExpr {
        let mut e = LinExpr::constant(t as f64);
        e.add_expr(&self.q[t as usize], -1.0);
        e
    }
}

pub fn encode_label_tracking(model: &mut MilpModel, occ: &Occupancy, cfg: &EncodingConfig) -> LabelTracking {
    let m = cfg.big_m() as f64;
    let mut q = vec![LinExpr::new()];
    for t in 1..=occ.horizon {
        let prev = q[t as usize - 1].clone();
        let o = occ.occupied(t);
        if o.terms.is_empty() {
            q.push(prev.plus(1.0));
            continue;
        }
        let v = model.add_var(format!("q_{t}"), cfg.counter_kind(), 0.0, t as f64);
        let m = m.min(t as f64);
        // q ≤ q_prev + 1
        let mut c = LinExpr::var(v);
        c.add_expr(&prev, -1.0);
        model.add_constraint(format!("qinc_{t}"), c, Cmp::Le, 1.0);
        // q ≥ q_prev + 1 - M·occ
        let mut c = LinExpr::var(v);
        c.add_expr(&prev, -1.0);
        c.add_expr(&o, m);
        model.add_constraint(format!("qrun_{t}"), c, Cmp::Ge, 1.0);
        // q ≤ M·(1 - occ)
        let mut c = LinExpr::var(v);
        c.add_expr(&o, m);
        model.add_constraint(format!("qrst_{t}"), c, Cmp::Le, m);
        q.push(LinExpr::var(v));
    }
    LabelTracking { q }
}

enum AtomSource {
    /// `last[s][t]`: `s` is the most recently occupied state at `t`.
    LastOccupied(Vec<Vec<LinExpr>>),
    /// `select[t][t']`: one-hot over the candidate values `t'` of `q̃[t]`.
    IndexSelect(Vec<Vec<(Time, VarId)>>),
}

fn encode_last_occupied(model: &mut MilpModel, occ: &Occupancy, cfg: &EncodingConfig) -> Vec<Vec<LinExpr>> {
    let n = occ.num_states();
    let mut last: Vec<Vec<LinExpr>> = vec![Vec::with_capacity(occ.horizon as usize + 1); n];
    for (s, row) in last.iter_mut().enumerate() {
        row.push(occ.var(s, 0).map(LinExpr::var).unwrap_or_default());
    }
    for t in 1..=occ.horizon {
        let o = occ.occupied(t);
        for (s, row) in last.iter_mut().enumerate() {
            let prev = row[t as usize - 1].clone();
            let here = occ.var(s, t);
            if o.terms.is_empty() || (here.is_none() && prev.terms.is_empty()) {
                row.push(if o.terms.is_empty() { prev } else { LinExpr::new() });
                continue;
            }
            let v = model.add_var(format!("l_{s}_{t}"), cfg.derived_kind(), 0.0, 1.0);
            let b = here.map(LinExpr::var).unwrap_or_default();
            // l ≥ b
            model.add_constraint(format!("lb_{s}_{t}"), sum(&LinExpr::var(v), &b, -1.0), Cmp::Ge, 0.0);
            // l ≤ b + l_prev
            let mut c = sum(&LinExpr::var(v), &b, -1.0);
            c.add_expr(&prev, -1.0);
            model.add_constraint(format!("lk_{s}_{t}"), c, Cmp::Le, 0.0);
            // l ≤ b + 1 - occ
            let mut c = sum(&LinExpr::var(v), &b, -1.0);
            c.add_expr(&o, 1.0);
            model.add_constraint(format!("lo_{s}_{t}"), c, Cmp::Le, 1.0);
            // l ≥ l_prev - occ
            let mut c = sum(&LinExpr::var(v), &prev, -1.0);
            c.add_expr(&o, 1.0);
            model.add_constraint(format!("lp_{s}_{t}"), c, Cmp::Ge, 0.0);
            row.push(LinExpr::var(v));
        }
    }
    last
}

fn encode_index_select(
    model: &mut MilpModel,
    occ: &Occupancy,
    track: &LabelTracking,
    cfg: &EncodingConfig,
) -> Vec<Vec<(Time, VarId)>> {
    let candidates: Vec<Time> = (0..=occ.horizon).filter(|&t| !occ.occupied(t).terms.is_empty()).collect();
    let mut select = Vec::with_capacity(occ.horizon as usize + 1);
    for t in 0..=occ.horizon {
        let row: Vec<(Time, VarId)> = candidates
            .iter()
            .take_while(|&&c| c <= t)
            .map(|&c| (c, model.add_var(format!("w_{t}_{c}"), VarKind::Binary, 0.0, 1.0)))
            .collect();
        let mut one = LinExpr::new();
        let mut idx = LinExpr::new();
        for &(c, w) in &row {
            one.add_term(w, 1.0);
            idx.add_term(w, c as f64);
        }
        model.add_constraint(format!("wone_{t}"), one, Cmp::Eq, 1.0);
        idx.add_expr(&track.q_tilde(t), -1.0);
        model.add_constraint(format!("widx_{t}"), idx, Cmp::Eq, 0.0);
        select.push(row);
    }
    let _ = cfg;
    select
}

/// Formula encoder over one occupancy.
pub struct MitlEncoder<'a> {
    model: &'a mut MilpModel,
    ts: &'a Vwts,
    cfg: &'a EncodingConfig,
    occ: &'a Occupancy,
    atoms: AtomSource,
    cache: BTreeMap<String, Vec<Lit>>,
    fresh: usize,
}

impl<'a> MitlEncoder<'a> {
    pub fn new(model: &'a mut MilpModel, ts: &'a Vwts, occ: &'a Occupancy, cfg: &'a EncodingConfig) -> Self {
        let atoms = match cfg.atoms {
            AtomEncoding::LastOccupied => AtomSource::LastOccupied(encode_last_occupied(model, occ, cfg)),
            AtomEncoding::IndexSelect => {
                let track = encode_label_tracking(model, occ, cfg);
                AtomSource::IndexSelect(encode_index_select(model, occ, &track, cfg))
            }
        };
        MitlEncoder { model, ts, cfg, occ, atoms, cache: BTreeMap::new(), fresh: 0 }
    }

    /// First time step of every signal returned by [`MitlEncoder::signal`].
    pub fn start(&self) -> Time {
        self.cfg.first_time()
    }

    fn len(&self) -> usize {
        (self.cfg.horizon - self.start() + 1) as usize
    }

    fn var(&mut self, prefix: &str, kind: VarKind, lo: f64, hi: f64) -> VarId {
        self.fresh += 1;
        self.model.add_var(format!("{prefix}{}", self.fresh), kind, lo, hi)
    }

    fn constraint(&mut self, prefix: &str, e: LinExpr, cmp: Cmp, rhs: f64) {
        let name = format!("{prefix}{}", self.model.num_constraints());
        self.model.add_constraint(name, e, cmp, rhs);
    }

    /// `∧ lits`, folding constants.
    pub fn and(&mut self, lits: Vec<Lit>) -> Lit {
        let mut es = Vec::with_capacity(lits.len());
        for l in lits {
            match l {
                Lit::Const(false) => return Lit::Const(false),
                Lit::Const(true) => {}
                Lit::Expr(e) => es.push(e),
            }
        }
        match es.len() {
            0 => Lit::Const(true),
            1 => Lit::Expr(es.pop().unwrap()),
            n => {
                let z = self.var("and", self.cfg.derived_kind(), 0.0, 1.0);
                let mut lower = LinExpr::var(z);
                for e in &es {
                    self.constraint("andle", sum(&LinExpr::var(z), e, -1.0), Cmp::Le, 0.0);
                    lower.add_expr(e, -1.0);
                }
                self.constraint("andge", lower, Cmp::Ge, 1.0 - n as f64);
                Lit::Expr(LinExpr::var(z))
            }
        }
    }

    /// `∨ lits`, folding constants.
    pub fn or(&mut self, lits: Vec<Lit>) -> Lit {
        let mut es = Vec::with_capacity(lits.len());
        for l in lits {
            match l {
                Lit::Const(true) => return Lit::Const(true),
                Lit::Const(false) => {}
                Lit::Expr(e) => es.push(e),
            }
        }
        match es.len() {
            0 => Lit::Const(false),
            1 => Lit::Expr(es.pop().unwrap()),
            _ => {
                let z = self.var("or", self.cfg.derived_kind(), 0.0, 1.0);
                let mut upper = LinExpr::var(z);
                for e in &es {
                    self.constraint("orge", sum(&LinExpr::var(z), e, -1.0), Cmp::Ge, 0.0);
                    upper.add_expr(e, -1.0);
                }
                self.constraint("orle", upper, Cmp::Le, 0.0);
                Lit::Expr(LinExpr::var(z))
            }
        }
    }

    fn atom(&mut self, name: &str) -> Vec<Lit> {
        let holders: Vec<StateId> =
            (0..self.ts.num_states()).filter(|&s| self.ts.labels(s).contains(name)).collect();
        let start = self.start();
        let mut out = Vec::with_capacity(self.len());
        for t in start..=self.cfg.horizon {
            if t < 0 || holders.is_empty() {
                out.push(Lit::Const(false));
                continue;
            }
            let lit = match &self.atoms {
                AtomSource::LastOccupied(last) => {
                    let mut e = LinExpr::new();
                    for &s in &holders {
                        e.add_expr(&last[s][t as usize], 1.0);
                    }
                    Lit::from_expr(e)
                }
                AtomSource::IndexSelect(select) => {
                    let row = select[t as usize].clone();
                    let mut e = LinExpr::new();
                    for (c, w) in row {
                        let held = self.occ.occupied_among(&holders, c);
                        if held.terms.is_empty() {
                            continue;
                        }
                        // u = w ∧ held
                        let u = self.var("sel", self.cfg.derived_kind(), 0.0, 1.0);
                        self.constraint("selw", LinExpr::var(u).term(w, -1.0), Cmp::Le, 0.0);
                        self.constraint("selh", sum(&LinExpr::var(u), &held, -1.0), Cmp::Le, 0.0);
                        let mut c = LinExpr::var(u).term(w, -1.0);
                        c.add_expr(&held, -1.0);
                        self.constraint("selb", c, Cmp::Ge, -1.0);
                        e.add_term(u, 1.0);
                    }
                    Lit::from_expr(e)
                }
            };
            out.push(lit);
        }
        out
    }

    /// Literals for `formula` at every step of `[start, T]`.
    pub fn signal(&mut self, formula: &Formula) -> Vec<Lit> {
        let key = format!("{formula}");
        if let Some(s) = self.cache.get(&key) {
            return s.clone();
        }
        let len = self.len();
        let out = match formula {
            Formula::True => vec![Lit::Const(true); len],
            Formula::Atom(name) => self.atom(name),
            Formula::Not(c) => self.signal(c).iter().map(Lit::negate).collect(),
            Formula::And(cs) | Formula::Or(cs) => {
                let kids: Vec<Vec<Lit>> = cs.iter().map(|c| self.signal(c)).collect();
                let conj = matches!(formula, Formula::And(_));
                (0..len)
                    .map(|i| {
                        let lits = kids.iter().map(|k| k[i].clone()).collect();
                        if conj {
                            self.and(lits)
                        } else {
                            self.or(lits)
                        }
                    })
                    .collect()
            }
            Formula::Globally(iv, c) | Formula::Eventually(iv, c) => {
                let child = self.signal(c);
                let conj = matches!(formula, Formula::Globally(..));
                let (lo, hi) = (iv.lo() as usize, iv.hi() as usize);
                (0..len)
                    .map(|i| {
                        if i + lo >= len {
                            return Lit::Const(conj);
                        }
                        let window = child[i + lo..=(i + hi).min(len - 1)].to_vec();
                        if conj {
                            self.and(window)
                        } else {
                            self.or(window)
                        }
                    })
                    .collect()
            }
            Formula::Until(iv, l, r) => {
                let lhs = self.signal(l);
                let rhs = self.signal(r);
                let (lo, hi) = (iv.lo() as usize, iv.hi() as usize);
                let closed = self.cfg.until_mode == UntilMode::Closed;
                (0..len)
                    .map(|i| {
                        if i + lo >= len {
                            return Lit::Const(false);
                        }
                        let end = (i + hi).min(len - 1);
                        // prefix[k] = ∧ lhs[i..i+k)
                        let mut prefix = Lit::Const(true);
                        let mut terms = Vec::with_capacity(end + 1 - i - lo);
                        for j in i..=end {
                            if closed {
                                prefix = self.and(vec![prefix, lhs[j].clone()]);
                            }
                            if j >= i + lo {
                                terms.push(self.and(vec![rhs[j].clone(), prefix.clone()]));
                            }
                            if !closed {
                                prefix = self.and(vec![prefix, lhs[j].clone()]);
                            }
                            if prefix == Lit::Const(false) {
                                break;
                            }
                        }
                        self.or(terms)
                    })
                    .collect()
            }
        };
        self.cache.insert(key, out.clone());
        out
    }
}

/// One counter step `c = (prev + 1)·z`, exact for integral `z`.
fn counter_step(model: &mut MilpModel, name: &str, prev: &LinExpr, z: &Lit, cap: f64, m: f64, kind: VarKind) -> LinExpr {
    match z {
        Lit::Const(false) => LinExpr::new(),
        Lit::Const(true) => prev.clone().plus(1.0),
        Lit::Expr(e) => {
            // the counter never exceeds `cap`, so a tighter constant suffices
            let m = m.min(cap);
            let c = model.add_var(name, kind, 0.0, cap);
            model.add_constraint(format!("{name}i"), sum(&LinExpr::var(c), prev, -1.0), Cmp::Le, 1.0);
            let mut run = sum(&LinExpr::var(c), prev, -1.0);
            run.add_expr(e, -m);
            model.add_constraint(format!("{name}r"), run, Cmp::Ge, 1.0 - m);
            model.add_constraint(format!("{name}z"), sum(&LinExpr::var(c), e, -m), Cmp::Le, 0.0);
            LinExpr::var(c)
        }
    }
}

/// Length of the run of equal values ending at the last literal, counting it.
fn run_counters(model: &mut MilpModel, tag: &str, lits: &[&Lit], cfg: &EncodingConfig) -> (LinExpr, LinExpr) {
    let m = cfg.big_m() as f64;
    let kind = cfg.counter_kind();
    let mut ones = LinExpr::new();
    let mut zeros = LinExpr::new();
    for (k, z) in lits.iter().enumerate() {
        let cap = (k + 1) as f64;
        let base = model.num_vars();
        ones = counter_step(model, &format!("{tag}1_{base}"), &ones, z, cap, m, kind);
        zeros = counter_step(model, &format!("{tag}0_{base}"), &zeros, &z.negate(), cap, m, kind);
    }
    (ones, zeros)
}

/// `c1 - c0 + 1 - 2z`: the signed run length minus the anchor point.
fn signed_run(ones: &LinExpr, zeros: &LinExpr, z: &Lit) -> LinExpr {
    let mut e = sum(ones, zeros, -1.0).plus(1.0);
    e.add_expr(&z.expr(), -2.0);
    e.normalized()
}

/// `η⁻` at 0 from the literals on `[-T′, 0]`.
pub fn encode_right_robustness(model: &mut MilpModel, window: &[Lit], cfg: &EncodingConfig) -> LinExpr {
    let (ones, zeros) = right_counters(model, window, cfg);
    signed_run(&ones, &zeros, window.last().unwrap())
}

/// `η⁺` at 0 from the literals on `[0, T]`.
pub fn encode_left_robustness(model: &mut MilpModel, window: &[Lit], cfg: &EncodingConfig) -> LinExpr {
    let (ones, zeros) = left_counters(model, window, cfg);
    signed_run(&ones, &zeros, &window[0])
}

fn right_counters(model: &mut MilpModel, window: &[Lit], cfg: &EncodingConfig) -> (LinExpr, LinExpr) {
    assert_eq!(window.len() as Time, cfg.tprime + 1, "right robustness needs the range [-T′, 0]");
    let lits: Vec<&Lit> = window.iter().collect();
    run_counters(model, "cr", &lits, cfg)
}

fn left_counters(model: &mut MilpModel, window: &[Lit], cfg: &EncodingConfig) -> (LinExpr, LinExpr) {
    assert_eq!(window.len() as Time, cfg.horizon + 1, "left robustness needs the range [0, T]");
    let lits: Vec<&Lit> = window.iter().rev().collect();
    run_counters(model, "cl", &lits, cfg)
}

/// `η±` at 0: the signed minimum of both run lengths. `signal` covers
/// `[-T′, T]`.
pub fn encode_combined_robustness(model: &mut MilpModel, signal: &[Lit], cfg: &EncodingConfig) -> LinExpr {
    let tp = cfg.tprime as usize;
    let (r1, r0) = right_counters(model, &signal[..=tp], cfg);
    let (l1, l0) = left_counters(model, &signal[tp..], cfg);
    let z = &signal[tp];
    let m = cfg.big_m() as f64;
    let kind = cfg.counter_kind();
    // exactly one counter of each pair is nonzero, and it counts the anchor
    let a = sum(&r1, &r0, 1.0).plus(-1.0).normalized();
    let b = sum(&l1, &l0, 1.0).plus(-1.0).normalized();
    let cap = cfg.tprime.min(cfg.horizon) as f64;
    let m = m.min(cfg.tprime.max(cfg.horizon) as f64);
    let base = model.num_vars();
    let mag = model.add_var(format!("mn_{base}"), kind, 0.0, cap);
    let pick = model.add_var(format!("mnsel_{base}"), VarKind::Binary, 0.0, 1.0);
    model.add_constraint(format!("mna_{base}"), sum(&LinExpr::var(mag), &a, -1.0), Cmp::Le, 0.0);
    model.add_constraint(format!("mnb_{base}"), sum(&LinExpr::var(mag), &b, -1.0), Cmp::Le, 0.0);
    model.add_constraint(format!("mnsa_{base}"), sum(&LinExpr::var(mag), &a, -1.0).term(pick, m), Cmp::Ge, 0.0);
    model.add_constraint(format!("mnsb_{base}"), sum(&LinExpr::var(mag), &b, -1.0).term(pick, -m), Cmp::Ge, -m);
    match z {
        Lit::Const(true) => LinExpr::var(mag),
        Lit::Const(false) => LinExpr::new().term(mag, -1.0),
        Lit::Expr(e) => {
            // p = mag·z, η = 2p - mag
            let p = model.add_var(format!("mnp_{base}"), kind, 0.0, cap);
            let m = cap;
            model.add_constraint(format!("mnp1_{base}"), LinExpr::var(p).term(mag, -1.0), Cmp::Le, 0.0);
            model.add_constraint(format!("mnp2_{base}"), sum(&LinExpr::var(p), e, -m), Cmp::Le, 0.0);
            let mut c = LinExpr::var(p).term(mag, -1.0);
            c.add_expr(e, -m);
            model.add_constraint(format!("mnp3_{base}"), c, Cmp::Ge, -m);
            LinExpr::new().term(p, 2.0).term(mag, -1.0)
        }
    }
}

/// The planning MILP together with the handles needed to decode it.
#[derive(Clone, Debug)]
pub struct Problem {
    pub model: MilpModel,
    pub config: EncodingConfig,
    pub occupancy: Occupancy,
    /// Robustness of each task at 0, as an expression over the model.
    pub etas: Vec<LinExpr>,
    /// Satisfaction of each task at 0.
    pub sat: Vec<Lit>,
    pub warnings: Vec<EncodeWarning>,
}

/// Maximize `Σ_i η_i · p_i` over all timed paths of `ts` up to the horizon.
pub fn build_problem1(ts: &Vwts, tasks: &TaskSet, cfg: &EncodingConfig) -> Result<Problem, EncodeError> {
    cfg.validate()?;
    let need = tasks.horizon() + 1;
    if cfg.horizon < need {
        return Err(EncodeError::HorizonTooSmall { horizon: cfg.horizon, required: need });
    }
    for task in tasks {
        task.formula.validate()?;
    }
    let mut model = MilpModel::new("trp");
    let occ = encode_ts(ts, cfg, &mut model)?;
    let mut warnings = Vec::new();
    let mut signals = Vec::with_capacity(tasks.len());
    {
        let mut enc = MitlEncoder::new(&mut model, ts, &occ, cfg);
        for task in tasks {
            signals.push(enc.signal(&task.formula));
        }
    }
    let zero = (-cfg.first_time()) as usize;
    let mut etas = Vec::with_capacity(tasks.len());
    let mut objective = LinExpr::new();
    for (i, (task, sig)) in tasks.iter().zip(&signals).enumerate() {
        let eta = match cfg.variant {
            RobustnessVariant::Right => encode_right_robustness(&mut model, &sig[..=zero], cfg),
            RobustnessVariant::Left => encode_left_robustness(&mut model, &sig[zero..], cfg),
            RobustnessVariant::Combined => encode_combined_robustness(&mut model, sig, cfg),
        };
        if cfg.variant != RobustnessVariant::Right && task.formula.horizon() > 0 {
            warnings.push(EncodeWarning::ClippedWindows {
                task: i,
                task_horizon: task.formula.horizon(),
                horizon: cfg.horizon,
            });
        }
        objective.add_expr(&eta, task.priority.to_f64());
        etas.push(eta);
    }
    model.set_objective(ObjSense::Maximize, objective.normalized());
    model.objective_step = tasks.objective_step().map(|g| *g.numer() as f64 / *g.denom() as f64);
    let sat = signals.iter().map(|s| s[zero].clone()).collect();
    Ok(Problem { model, config: cfg.clone(), occupancy: occ, etas, sat, warnings })
}

impl Problem {
    /// Copy of the model with occupancy fixed to the given timed path.
    /// Pairs off the path are fixed to zero.
    pub fn pinned(&self, states: &[StateId], times: &[Time]) -> MilpModel {
        let mut model = self.model.clone();
        for s in 0..self.occupancy.num_states() {
            for t in 0..=self.occupancy.horizon {
                if let Some(v) = self.occupancy.var(s, t) {
                    let on = states.iter().zip(times).any(|(&p, &q)| p == s && q == t);
                    let x = if on { 1.0 } else { 0.0 };
                    let var = &mut model.vars[v.index()];
                    var.lower = x;
                    var.upper = x;
                }
            }
        }
        model
    }
}
