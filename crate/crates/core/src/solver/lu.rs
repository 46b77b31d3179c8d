//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! The factorization is a right-looking Gaussian elimination that takes
//! column and row singletons first and otherwise picks pivots by Markowitz
//! cost under a threshold stability test. Basis changes are appended as eta
//! columns until the next refactorization.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

const ABS_PIVOT_TOL: f64 = 1e-11;
const THRESHOLD: f64 = 0.1;
const DROP_TOL: f64 = 1e-14;
const MARKOWITZ_COLUMNS: usize = 4;

/// Positions (columns) and rows left without a pivot.
#[derive(Debug)]
pub(crate) struct Singular {
    pub cols: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct LuFactor {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    piv_val: Vec<f64>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    eta_pos: Vec<usize>,
    eta_piv: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
}

impl LuFactor {
    /// Factors the `m x m` matrix whose column `j` is `cols[j]` (row, value).
    pub(crate) fn factor(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<LuFactor, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut col: Vec<Vec<(usize, f64)>> = cols.to_vec();
        let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, c) in col.iter().enumerate() {
            for &(i, _) in c {
                row_cols[i].push(j);
            }
        }
        let mut col_active = vec![true; m];
        let mut row_active = vec![true; m];
        let mut col_heap: BinaryHeap<Reverse<(usize, usize)>> = BinaryHeap::with_capacity(m);
        let mut row_heap: BinaryHeap<Reverse<(usize, usize)>> = BinaryHeap::with_capacity(m);
        for j in 0..m {
            col_heap.push(Reverse((col[j].len(), j)));
        }
        for i in 0..m {
            row_heap.push(Reverse((row_cols[i].len(), i)));
        }

        let mut f = LuFactor { m, ..LuFactor::default() };
        f.l_start.push(0);
        f.u_start.push(0);
        f.eta_start.push(0);
        let mut bad_cols = Vec::new();
        let mut mark = vec![usize::MAX; m];
        let mut remaining = m;

        while remaining > 0 {
            // smallest active column
            let Some(Reverse((cnt, j))) = pop_valid(&mut col_heap, |c, j| col_active[j] && col[j].len() == c) else {
                break;
            };
            let pivot: Option<(usize, usize)> = if cnt == 0 {
                None
            } else if cnt == 1 {
                let (i, v) = col[j][0];
                (libm::fabs(v) > ABS_PIVOT_TOL).then_some((i, j))
            } else {
                col_heap.push(Reverse((cnt, j)));
                let row_pick = match pop_valid(&mut row_heap, |c, i| row_active[i] && row_cols[i].len() == c) {
                    Some(Reverse((1, i))) => {
                        let jj = row_cols[i][0];
                        let v = entry(&col[jj], i);
                        let cmax = col[jj].iter().fold(0.0f64, |a, e| a.max(libm::fabs(e.1)));
                        row_heap.push(Reverse((1, i)));
                        (libm::fabs(v) > ABS_PIVOT_TOL && libm::fabs(v) >= THRESHOLD * cmax).then_some((i, jj))
                    }
                    Some(r) => {
                        row_heap.push(r);
                        None
                    }
                    None => None,
                };
                row_pick.or_else(|| {
                    let mut cands = Vec::with_capacity(MARKOWITZ_COLUMNS);
                    while cands.len() < MARKOWITZ_COLUMNS {
                        match pop_valid(&mut col_heap, |c, j| col_active[j] && col[j].len() == c) {
                            Some(e) => cands.push(e),
                            None => break,
                        }
                    }
                    let mut best: Option<(usize, usize, usize, f64)> = None;
                    for &Reverse((c, jj)) in &cands {
                        let cmax = col[jj].iter().fold(0.0f64, |a, e| a.max(libm::fabs(e.1)));
                        for &(i, v) in &col[jj] {
                            let av = libm::fabs(v);
                            if av <= ABS_PIVOT_TOL || av < THRESHOLD * cmax {
                                continue;
                            }
                            let cost = (row_cols[i].len() - 1) * (c - 1);
                            let better = match best {
                                None => true,
                                Some((bc, _, _, bv)) => cost < bc || (cost == bc && av > bv),
                            };
                            if better {
                                best = Some((cost, i, jj, av));
                            }
                        }
                    }
                    for e in cands {
                        col_heap.push(e);
                    }
                    best.map(|(_, i, jj, _)| (i, jj))
                })
            };

            let Some((r, c)) = pivot else {
                // column without usable pivot: leave it for the caller to repair
                col_active[j] = false;
                for &(i, _) in &col[j] {
                    remove_item(&mut row_cols[i], j);
                    row_heap.push(Reverse((row_cols[i].len(), i)));
                }
                bad_cols.push(j);
                remaining -= 1;
                continue;
            };

            let p = entry(&col[c], r);
            // L multipliers from the pivot column
            for &(i, v) in &col[c] {
                if i != r {
                    f.l_idx.push(i);
                    f.l_val.push(v / p);
                }
            }
            let l_from = f.l_start[f.l_start.len() - 1];
            let l_to = f.l_idx.len();
            f.l_start.push(l_to);
            // retire the pivot column
            col_active[c] = false;
            for &(i, _) in &col[c] {
                remove_item(&mut row_cols[i], c);
            }
            row_active[r] = false;
            // U row and elimination
            let urow: Vec<usize> = row_cols[r].clone();
            for &jj in &urow {
                let cj = &mut col[jj];
                let Some(u) = cj.iter().find(|e| e.0 == r).map(|e| e.1) else {
                    continue;
                };
                for (k, &(i, _)) in cj.iter().enumerate() {
                    mark[i] = k;
                }
                f.u_idx.push(jj);
                f.u_val.push(u);
                for k in l_from..l_to {
                    let i = f.l_idx[k];
                    let delta = f.l_val[k] * u;
                    if mark[i] != usize::MAX && cj[mark[i]].0 == i {
                        cj[mark[i]].1 -= delta;
                    } else {
                        mark[i] = cj.len();
                        cj.push((i, -delta));
                        row_cols[i].push(jj);
                    }
                }
                // drop the pivot row and exact cancellations
                for &(i, _) in cj.iter() {
                    mark[i] = usize::MAX;
                }
                cj.retain(|&(i, v)| i != r && libm::fabs(v) > DROP_TOL);
                col_heap.push(Reverse((cj.len(), jj)));
            }
            // cancellations may leave stale column references in the touched rows
            for k in l_from..l_to {
                let i = f.l_idx[k];
                let rc = &mut row_cols[i];
                rc.retain(|&jj| col_active[jj] && col[jj].iter().any(|e| e.0 == i));
                row_heap.push(Reverse((rc.len(), i)));
            }
            row_cols[r].clear();
            f.u_start.push(f.u_idx.len());
            f.piv_row.push(r);
            f.piv_col.push(c);
            f.piv_val.push(p);
            remaining -= 1;
        }

        if f.piv_row.len() < m {
            let mut covered = vec![false; m];
            for &r in &f.piv_row {
                covered[r] = true;
            }
            let rows = (0..m).filter(|&i| !covered[i]).collect();
            let mut cols: Vec<usize> = bad_cols;
            let mut seen = vec![false; m];
            for &c in &f.piv_col {
                seen[c] = true;
            }
            for &c in &cols {
                seen[c] = true;
            }
            cols.extend((0..m).filter(|&j| !seen[j]));
            cols.sort_unstable();
            return Err(Singular { cols, rows });
        }
        Ok(f)
    }

    pub(crate) fn num_etas(&self) -> usize {
        self.eta_pos.len()
    }

    /// Records the replacement of basis position `pos` by a column whose
    /// FTRAN image is `alpha` (position-indexed).
    pub(crate) fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        self.eta_pos.push(pos);
        self.eta_piv.push(alpha[pos]);
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && libm::fabs(a) > DROP_TOL {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }

    /// Solves `B x = b`; `b` is row-indexed, the result position-indexed.
    pub(crate) fn ftran(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        for k in 0..self.piv_row.len() {
            let yr = y[self.piv_row[k]];
            if yr != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    y[self.l_idx[e]] -= self.l_val[e] * yr;
                }
            }
        }
        let mut x = vec![0.0; self.m];
        for k in (0..self.piv_row.len()).rev() {
            let mut v = y[self.piv_row[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                v -= self.u_val[e] * x[self.u_idx[e]];
            }
            x[self.piv_col[k]] = v / self.piv_val[k];
        }
        for k in 0..self.eta_pos.len() {
            let p = self.eta_pos[k];
            let xp = x[p] / self.eta_piv[k];
            x[p] = xp;
            if xp != 0.0 {
                for e in self.eta_start[k]..self.eta_start[k + 1] {
                    x[self.eta_idx[e]] -= self.eta_val[e] * xp;
                }
            }
        }
        x
    }

    /// Solves `Bᵀ y = c`; `c` is position-indexed, the result row-indexed.
    pub(crate) fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut c = c.to_vec();
        for k in (0..self.eta_pos.len()).rev() {
            let p = self.eta_pos[k];
            let mut v = c[p];
            for e in self.eta_start[k]..self.eta_start[k + 1] {
                v -= self.eta_val[e] * c[self.eta_idx[e]];
            }
            c[p] = v / self.eta_piv[k];
        }
        let mut w = vec![0.0; self.m];
        let mut acc = vec![0.0; self.m];
        for k in 0..self.piv_row.len() {
            let wk = (c[self.piv_col[k]] - acc[self.piv_col[k]]) / self.piv_val[k];
            w[self.piv_row[k]] = wk;
            if wk != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    acc[self.u_idx[e]] += self.u_val[e] * wk;
                }
            }
        }
        for k in (0..self.piv_row.len()).rev() {
            let r = self.piv_row[k];
            let mut v = w[r];
            for e in self.l_start[k]..self.l_start[k + 1] {
                v -= self.l_val[e] * w[self.l_idx[e]];
            }
            w[r] = v;
        }
        w
    }
}

fn pop_valid(
    heap: &mut BinaryHeap<Reverse<(usize, usize)>>,
    valid: impl Fn(usize, usize) -> bool,
) -> Option<Reverse<(usize, usize)>> {
    while let Some(Reverse((c, j))) = heap.pop() {
        if valid(c, j) {
            return Some(Reverse((c, j)));
        }
    }
    None
}

fn entry(col: &[(usize, f64)], row: usize) -> f64 {
    col.iter().find(|e| e.0 == row).map_or(0.0, |e| e.1)
}

fn remove_item(v: &mut Vec<usize>, x: usize) {
    if let Some(k) = v.iter().position(|&y| y == x) {
        v.swap_remove(k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[&[f64]]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m).map(|j| (0..m).filter(|&i| a[i][j] != 0.0).map(|i| (i, a[i][j])).collect()).collect()
    }

    fn matvec(a: &[&[f64]], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn solves_against_dense_matrix() {
        let a: [&[f64]; 4] =
            [&[2.0, 0.0, 1.0, 0.0], &[1.0, 3.0, 0.0, 0.0], &[0.0, 1.0, 4.0, 1.0], &[1.0, 0.0, 0.0, -2.0]];
        let lu = LuFactor::factor(4, &dense_cols(&a)).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        let b = matvec(&a, &x);
        let got = lu.ftran(&b);
        for (g, e) in got.iter().zip(x) {
            assert!((g - e).abs() < 1e-12, "{got:?}");
        }
        // transpose solve
        let c = [0.3, -1.0, 2.0, 0.25];
        let y = lu.btran(&c);
        for j in 0..4 {
            let s: f64 = (0..4).map(|i| a[i][j] * y[i]).sum();
            assert!((s - c[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_updates_track_column_replacement() {
        let a: [&[f64]; 3] = [&[1.0, 2.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]];
        let mut lu = LuFactor::factor(3, &dense_cols(&a)).unwrap();
        // replace position 2 by column (1, 1, 2)
        let col = [1.0, 1.0, 2.0];
        let alpha = lu.ftran(&col);
        lu.push_eta(2, &alpha);
        let b2: [&[f64]; 3] = [&[1.0, 2.0, 1.0], &[0.0, 1.0, 1.0], &[0.0, 0.0, 2.0]];
        let x = [0.5, 1.5, -1.0];
        let got = lu.ftran(&matvec(&b2, &x));
        for (g, e) in got.iter().zip(x) {
            assert!((g - e).abs() < 1e-12);
        }
        let c = [1.0, 2.0, 3.0];
        let y = lu.btran(&c);
        for j in 0..3 {
            let s: f64 = (0..3).map(|i| b2[i][j] * y[i]).sum();
            assert!((s - c[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_singular_positions() {
        let a: [&[f64]; 3] = [&[1.0, 1.0, 0.0], &[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]];
        let err = LuFactor::factor(3, &dense_cols(&a)).unwrap_err();
        assert_eq!(err.cols.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }
}
