//! Minimal SVG line charts of benchmark rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::bench::{BenchKind, BenchRow};

/// Which column goes on the vertical axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    LpVars,
    LpConst,
    Encoding,
    Solving,
}

impl Metric {
    fn value(self, r: &BenchRow) -> f64 {
        match self {
            Metric::LpVars => r.lpvars as f64,
            Metric::LpConst => r.lpconst as f64,
            Metric::Encoding => r.t_encoding,
            Metric::Solving => r.t_solving,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::LpVars => "LP variables",
            Metric::LpConst => "LP constraints",
            Metric::Encoding => "encoding time (s)",
            Metric::Solving => "solving time (s)",
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// One series per `(|S|, |D|)` of the VWTS rows, `T` on the horizontal axis.
pub fn scaling_svg(rows: &[BenchRow], metric: Metric) -> String {
    let mut series: BTreeMap<(usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.kind == BenchKind::Vwts) {
        series.entry((r.states, r.tasks)).or_default().push((r.horizon as f64, metric.value(r)));
    }
    for pts in series.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let all = series.values().flatten();
    let (x0, x1) = all.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let y1 = all.fold(0.0f64, |m, p| m.max(p.1)).max(1e-9);
    let x1 = if x1 > x0 { x1 } else { x0 + 1.0 };
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y / y1 * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {} H{} M{PAD} {} V{PAD}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">horizon T</text>"#, W / 2.0, H - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle" font-size="13">{}</text>"#,
        H / 2.0,
        H / 2.0,
        metric.label()
    );
    for k in 0..=4 {
        let y = y1 * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{}</text>"#, PAD - 5.0, sy(y) + 3.0, tick(y));
    }
    let mut xs: Vec<f64> = series.values().flatten().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for x in xs {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="10">{x}</text>"#, sx(x), H - PAD + 15.0);
    }
    for (i, ((states, tasks), pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let d: Vec<String> = pts.iter().map(|p| format!("{:.1},{:.1}", sx(p.0), sy(p.1))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#, d.join(" "));
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-size="11" fill="{color}">|S|={states} |D|={tasks}</text>"#,
            PAD + 10.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(y: f64) -> String {
    if y >= 100.0 {
        format!("{y:.0}")
    } else {
        format!("{y:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(s: usize, d: usize, t: i64, v: usize) -> BenchRow {
        BenchRow {
            kind: BenchKind::Vwts,
            states: s,
            tasks: d,
            horizon: t,
            receding: None,
            t_encoding: 0.1,
            t_solving: 0.2,
            lpvars: v,
            lpconst: 2 * v,
            status: "Optimal".into(),
            objective: Some(1.0),
            milp_calls: 0,
        }
    }

    #[test]
    fn one_polyline_per_series() {
        let rows = [row(10, 2, 25, 100), row(10, 2, 50, 200), row(10, 5, 25, 150), row(10, 5, 50, 300)];
        let svg = scaling_svg(&rows, Metric::LpVars);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("|S|=10 |D|=5"));
    }
}
