//! MPS export and import of [`MilpModel`]s.
//!
//! The writer emits fixed-format MPS: fields start in columns 2, 5, 15, 25,
//! 40 and 50, names are at most 8 characters and numbers at most 12.
//! Columns are named `C0000000`, `C0000001`, ... and rows `R0000000`, ...
//! so that any model fits the layout. The objective sense goes in an
//! `OBJSENSE` section and a constant objective term is written as the
//! negated right-hand side of the objective row.
//!
//! [`MpsFlavor::Free`] keeps the same names but separates fields by single
//! spaces and prints numbers in full precision. The reader splits on
//! whitespace and therefore accepts both flavors, as well as fixed files
//! from other tools whose names contain no spaces.

use std::collections::HashMap;
use std::fmt::Write as _;

use trp_core::milp::{Cmp, LinExpr, MilpModel, ObjSense, VarKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MpsFlavor {
    #[default]
    Fixed,
    Free,
}

#[derive(Debug, PartialEq, thiserror::Error)]
pub enum MpsError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("model has no objective row")]
    NoObjective,
    #[error("missing ENDATA")]
    Truncated,
}

const OBJ: &str = "OBJ";

fn col_name(i: usize) -> String {
    format!("C{i:07}")
}

fn row_name(i: usize) -> String {
    format!("R{i:07}")
}

/// Shortest decimal text of `v` with at most 12 characters.
fn fixed_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e11 {
        return format!("{}", v as i64);
    }
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    let decimal = (0..=12).map(|prec| {
        let s = format!("{v:.prec$}");
        match s.strip_prefix("-0.") {
            Some(rest) => format!("-.{rest}"),
            None => s.strip_prefix("0.").map_or(s.clone(), |rest| format!(".{rest}")),
        }
    });
    let scientific = (0..=10).map(|prec| format!("{v:.prec$e}"));
    decimal
        .chain(scientific)
        .filter(|s| s.len() <= 12)
        .min_by(|a, b| {
            let err = |s: &String| (s.parse::<f64>().unwrap_or(f64::INFINITY) - v).abs();
            err(a).total_cmp(&err(b))
        })
        .unwrap_or_else(|| format!("{v:.0e}"))
}

struct Lines {
    out: String,
    flavor: MpsFlavor,
}

impl Lines {
    fn section(&mut self, name: &str) {
        self.out.push_str(name);
        self.out.push('\n');
    }

    /// One data line with up to six fields.
    fn fields(&mut self, f: [&str; 6]) {
        match self.flavor {
            MpsFlavor::Fixed => {
                const START: [usize; 6] = [1, 4, 14, 24, 39, 49];
                let mut line = String::new();
                for (k, text) in f.iter().enumerate() {
                    if text.is_empty() {
                        continue;
                    }
                    while line.len() < START[k] {
                        line.push(' ');
                    }
                    line.push_str(text);
                }
                self.out.push_str(line.trim_end());
            }
            MpsFlavor::Free => {
                self.out.push(' ');
                let parts: Vec<&str> = f.iter().copied().filter(|s| !s.is_empty()).collect();
                self.out.push_str(&parts.join(" "));
            }
        }
        self.out.push('\n');
    }

    fn num(&self, v: f64) -> String {
        match self.flavor {
            MpsFlavor::Fixed => fixed_number(v),
            MpsFlavor::Free => format!("{v:?}"),
        }
    }
}

pub fn write_mps(model: &MilpModel, flavor: MpsFlavor) -> String {
    let mut w = Lines { out: String::new(), flavor };
    let name: String = model.name.chars().filter(|c| !c.is_whitespace()).take(8).collect();
    let _ = writeln!(w.out, "NAME          {}", if name.is_empty() { "MODEL" } else { &name });
    w.section("OBJSENSE");
    w.fields(["", if model.sense == ObjSense::Maximize { "MAX" } else { "MIN" }, "", "", "", ""]);
    w.section("ROWS");
    w.fields(["N", OBJ, "", "", "", ""]);
    for (i, c) in model.constraints.iter().enumerate() {
        let kind = match c.cmp {
            Cmp::Le => "L",
            Cmp::Ge => "G",
            Cmp::Eq => "E",
        };
        w.fields([kind, &row_name(i), "", "", "", ""]);
    }

    let mut entries: Vec<Vec<(String, f64)>> = vec![Vec::new(); model.num_vars()];
    for &(v, c) in &model.objective.terms {
        entries[v.index()].push((OBJ.to_string(), c));
    }
    for (i, con) in model.constraints.iter().enumerate() {
        for &(v, c) in &con.terms {
            entries[v.index()].push((row_name(i), c));
        }
    }
    w.section("COLUMNS");
    let mut in_marker = false;
    let mut markers = 0;
    for (j, col) in entries.iter().enumerate() {
        let integral = model.vars[j].kind.is_integral();
        if integral != in_marker {
            let tag = if integral { "'INTORG'" } else { "'INTEND'" };
            w.fields(["", &format!("M{markers:07}"), "'MARKER'", "", tag, ""]);
            markers += 1;
            in_marker = integral;
        }
        let name = col_name(j);
        if col.is_empty() {
            w.fields(["", &name, OBJ, "0", "", ""]);
        }
        for pair in col.chunks(2) {
            let a = w.num(pair[0].1);
            match pair.get(1) {
                Some((r, c)) => {
                    let b = w.num(*c);
                    w.fields(["", &name, &pair[0].0, &a, r, &b]);
                }
                None => w.fields(["", &name, &pair[0].0, &a, "", ""]),
            }
        }
    }
    if in_marker {
        w.fields(["", &format!("M{markers:07}"), "'MARKER'", "", "'INTEND'", ""]);
    }

    w.section("RHS");
    if model.objective.constant != 0.0 {
        let v = w.num(-model.objective.constant);
        w.fields(["", "RHS", OBJ, &v, "", ""]);
    }
    for (i, c) in model.constraints.iter().enumerate() {
        if c.rhs != 0.0 {
            let v = w.num(c.rhs);
            w.fields(["", "RHS", &row_name(i), &v, "", ""]);
        }
    }

    w.section("BOUNDS");
    for (j, v) in model.vars.iter().enumerate() {
        let name = col_name(j);
        let (lo, up) = (v.lower, v.upper);
        if v.kind == VarKind::Binary && lo == 0.0 && up == 1.0 {
            w.fields(["BV", "BND", &name, "", "", ""]);
            continue;
        }
        if lo == up {
            let x = w.num(lo);
            w.fields(["FX", "BND", &name, &x, "", ""]);
            continue;
        }
        if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            w.fields(["FR", "BND", &name, "", "", ""]);
            continue;
        }
        if lo == f64::NEG_INFINITY {
            w.fields(["MI", "BND", &name, "", "", ""]);
        } else if lo != 0.0 || up < 0.0 || v.kind.is_integral() {
            let x = w.num(lo);
            w.fields(["LO", "BND", &name, &x, "", ""]);
        }
        if up.is_finite() {
            let x = w.num(up);
            w.fields(["UP", "BND", &name, &x, "", ""]);
        } else if v.kind.is_integral() {
            w.fields(["PL", "BND", &name, "", "", ""]);
        }
    }
    w.section("ENDATA");
    w.out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

enum RowRef {
    Objective,
    /// A second `N` row; its entries are dropped.
    Free,
    Constraint(usize),
}

/// Parses fixed or free MPS into a model. Ranged rows become two
/// constraints. Without an `OBJSENSE` section the objective is minimized.
pub fn read_mps(text: &str) -> Result<MilpModel, MpsError> {
    let mut model = MilpModel::new("");
    model.sense = ObjSense::Minimize;
    let mut section = Section::None;
    let mut rows: HashMap<String, RowRef> = HashMap::new();
    let mut objective_row: Option<String> = None;
    let mut cols: HashMap<String, usize> = HashMap::new();
    let mut con_rows: Vec<(String, Cmp)> = Vec::new();
    let mut con_terms: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut ranges: Vec<Option<f64>> = Vec::new();
    let mut obj_terms: Vec<(usize, f64)> = Vec::new();
    let mut obj_constant = 0.0;
    let mut integer_block = false;
    let mut bounded = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let err = |msg: &str| MpsError::Syntax { line: line_no, msg: msg.to_string() };
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match tokens[0] {
                "NAME" => {
                    model.name = tokens.get(1).unwrap_or(&"").to_string();
                    Section::None
                }
                "OBJSENSE" => {
                    if let Some(s) = tokens.get(1) {
                        model.sense = parse_sense(s).ok_or_else(|| err("bad objective sense"))?;
                    }
                    Section::ObjSense
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                _ => return Err(err("unknown section")),
            };
            if section == Section::End {
                break;
            }
            continue;
        }
        let number = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
        match section {
            Section::ObjSense => model.sense = parse_sense(tokens[0]).ok_or_else(|| err("bad objective sense"))?,
            Section::Rows => {
                let [kind, name] = tokens[..] else { return Err(err("expected row type and name")) };
                let r = match kind {
                    "N" if objective_row.is_none() => {
                        objective_row = Some(name.to_string());
                        RowRef::Objective
                    }
                    "N" => RowRef::Free,
                    "L" | "G" | "E" => {
                        let cmp = match kind {
                            "L" => Cmp::Le,
                            "G" => Cmp::Ge,
                            _ => Cmp::Eq,
                        };
                        con_rows.push((name.to_string(), cmp));
                        con_terms.push(Vec::new());
                        rhs.push(0.0);
                        ranges.push(None);
                        RowRef::Constraint(con_rows.len() - 1)
                    }
                    _ => return Err(err("unknown row type")),
                };
                rows.insert(name.to_string(), r);
            }
            Section::Columns => {
                if tokens.get(1) == Some(&"'MARKER'") {
                    match tokens.get(2) {
                        Some(&"'INTORG'") => integer_block = true,
                        Some(&"'INTEND'") => integer_block = false,
                        _ => return Err(err("bad marker")),
                    }
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(err("expected column, row, value [, row, value]"));
                }
                let j = match cols.get(tokens[0]) {
                    Some(&j) => j,
                    None => {
                        let kind = if integer_block { VarKind::Integer } else { VarKind::Continuous };
                        let j = model.add_var(tokens[0], kind, 0.0, f64::INFINITY).index();
                        cols.insert(tokens[0].to_string(), j);
                        bounded.push(false);
                        j
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let v = number(pair[1])?;
                    match rows.get(pair[0]).ok_or_else(|| err("unknown row"))? {
                        RowRef::Objective => obj_terms.push((j, v)),
                        RowRef::Free => {}
                        RowRef::Constraint(i) => con_terms[*i].push((j, v)),
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let rest = if tokens.len() % 2 == 1 { &tokens[1..] } else { &tokens[..] };
                for pair in rest.chunks(2) {
                    if pair.len() != 2 {
                        return Err(err("expected row and value"));
                    }
                    let v = number(pair[1])?;
                    match (rows.get(pair[0]).ok_or_else(|| err("unknown row"))?, section) {
                        (RowRef::Objective, Section::Rhs) => obj_constant = -v,
                        (RowRef::Constraint(i), Section::Rhs) => rhs[*i] = v,
                        (RowRef::Constraint(i), _) => ranges[*i] = Some(v),
                        _ => {}
                    }
                }
            }
            Section::Bounds => {
                let kind = tokens[0];
                let no_value = matches!(kind, "FR" | "MI" | "PL" | "BV");
                let (col, value) = match (tokens.len(), no_value) {
                    (3, true) => (tokens[2], None),
                    (2, true) => (tokens[1], None),
                    (4, false) => (tokens[2], Some(number(tokens[3])?)),
                    (3, false) => (tokens[1], Some(number(tokens[2])?)),
                    _ => return Err(err("malformed bound")),
                };
                let j = *cols.get(col).ok_or_else(|| err("unknown column"))?;
                let var = &mut model.vars[j];
                let v = value.unwrap_or(0.0);
                match kind {
                    "UP" => {
                        if v < 0.0 && var.lower == 0.0 && !bounded[j] {
                            var.lower = f64::NEG_INFINITY;
                        }
                        var.upper = v;
                    }
                    "LO" => var.lower = v,
                    "FX" => {
                        var.lower = v;
                        var.upper = v;
                    }
                    "FR" => {
                        var.lower = f64::NEG_INFINITY;
                        var.upper = f64::INFINITY;
                    }
                    "MI" => var.lower = f64::NEG_INFINITY,
                    "PL" => var.upper = f64::INFINITY,
                    "BV" => {
                        var.kind = VarKind::Binary;
                        var.lower = 0.0;
                        var.upper = 1.0;
                    }
                    "LI" => {
                        var.kind = VarKind::Integer;
                        var.lower = v;
                    }
                    "UI" => {
                        var.kind = VarKind::Integer;
                        var.upper = v;
                    }
                    _ => return Err(err("unknown bound type")),
                }
                bounded[j] = true;
            }
            Section::None | Section::End => return Err(err("data outside a section")),
        }
    }
    if section != Section::End {
        return Err(MpsError::Truncated);
    }
    if objective_row.is_none() {
        return Err(MpsError::NoObjective);
    }
    for v in &mut model.vars {
        if v.kind == VarKind::Integer && v.lower == 0.0 && v.upper == 1.0 {
            v.kind = VarKind::Binary;
        }
    }
    let mut objective = LinExpr::constant(obj_constant);
    for (j, c) in obj_terms {
        objective.add_term(trp_core::milp::VarId::from_index(j), c);
    }
    model.set_objective(model.sense, objective);
    for (i, ((name, cmp), terms)) in con_rows.into_iter().zip(con_terms).enumerate() {
        let mut e = LinExpr::new();
        for (j, c) in terms {
            e.add_term(trp_core::milp::VarId::from_index(j), c);
        }
        let b = rhs[i];
        match ranges[i] {
            None => {
                model.add_constraint(name, e, cmp, b);
            }
            Some(r) => {
                let (lo, hi) = match cmp {
                    Cmp::Le => (b - r.abs(), b),
                    Cmp::Ge => (b, b + r.abs()),
                    Cmp::Eq if r >= 0.0 => (b, b + r),
                    Cmp::Eq => (b + r, b),
                };
                model.add_constraint(format!("{name}_lo"), e.clone(), Cmp::Ge, lo);
                model.add_constraint(format!("{name}_hi"), e, Cmp::Le, hi);
            }
        }
    }
    Ok(model)
}

fn parse_sense(s: &str) -> Option<ObjSense> {
    match s.to_ascii_uppercase().as_str() {
        "MAX" | "MAXIMIZE" => Some(ObjSense::Maximize),
        "MIN" | "MINIMIZE" => Some(ObjSense::Minimize),
        _ => None,
    }
}
