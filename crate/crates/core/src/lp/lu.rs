//! Sparse LU factorization of simplex bases with product-form updates.
//!
//! Pivots are chosen by a Markowitz search over the sparsest active columns
//! with threshold partial pivoting. Between refactorizations each basis change
//! appends an eta column so that `B_k = B_0 E_1 ... E_k`.

/// Entries below this magnitude are dropped from eta columns.
const DROP_TOL: f64 = 1e-14;
/// Threshold for partial pivoting: |pivot| >= THRESHOLD * max |column|.
const THRESHOLD: f64 = 0.1;
/// Number of sparsest columns examined per Markowitz search.
const SEARCH_COLUMNS: usize = 4;
/// Columns whose largest active entry is below this are treated as empty.
const ABS_PIVOT_TOL: f64 = 1e-11;

#[derive(Debug)]
pub(crate) struct Singular {
    /// Basis positions that could not be pivoted.
    pub positions: Vec<usize>,
    /// Rows left without a pivot.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    m: usize,
    pivot_row: Vec<usize>,
    pivot_col: Vec<usize>,
    diag: Vec<f64>,
    // L multipliers per pivot step.
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    // Off-diagonal U entries of each pivot row.
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    etas: Vec<Eta>,
}

impl BasisFactor {
    /// Factorizes the `m x m` matrix whose `k`-th column is `columns[k]`.
    pub(crate) fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut col_count = vec![0usize; m];
        for (c, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                if v != 0.0 {
                    rows[r].push((c, v));
                    cols[c].push(r);
                    col_count[c] += 1;
                }
            }
        }
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut pos = vec![usize::MAX; m];

        let mut f = BasisFactor {
            m,
            l_start: vec![0],
            u_start: vec![0],
            ..Default::default()
        };

        for _step in 0..m {
            // Gather the sparsest active columns.
            let mut cands: Vec<(usize, usize)> = Vec::with_capacity(SEARCH_COLUMNS);
            for c in 0..m {
                if col_done[c] {
                    continue;
                }
                let cnt = col_count[c];
                if cands.len() < SEARCH_COLUMNS {
                    cands.push((cnt, c));
                    cands.sort_unstable();
                } else if cnt < cands[SEARCH_COLUMNS - 1].0 {
                    cands[SEARCH_COLUMNS - 1] = (cnt, c);
                    cands.sort_unstable();
                }
                if cands.len() == SEARCH_COLUMNS && cands[SEARCH_COLUMNS - 1].0 <= 1 {
                    break;
                }
            }

            let mut best: Option<(usize, usize, f64, usize)> = None; // (row, col, val, cost)
            for &(cnt, c) in &cands {
                if cnt == 0 {
                    continue;
                }
                let mut col_max = 0.0f64;
                let mut entries: Vec<(usize, f64)> = Vec::with_capacity(cnt);
                for &r in &cols[c] {
                    if row_done[r] {
                        continue;
                    }
                    if let Some(&(_, v)) = rows[r].iter().find(|(j, _)| *j == c) {
                        col_max = col_max.max(v.abs());
                        entries.push((r, v));
                    }
                }
                if col_max < ABS_PIVOT_TOL {
                    continue;
                }
                for (r, v) in entries {
                    if v.abs() < THRESHOLD * col_max {
                        continue;
                    }
                    let cost = (rows[r].len() - 1) * (cnt - 1);
                    let better = match best {
                        None => true,
                        Some((br, _, bv, bc)) => {
                            cost < bc
                                || (cost == bc
                                    && (v.abs() > bv.abs() || (v.abs() == bv.abs() && r < br)))
                        }
                    };
                    if better {
                        best = Some((r, c, v, cost));
                    }
                }
                if matches!(best, Some((_, _, _, 0))) {
                    break;
                }
            }

            let Some((p, c, pv, _)) = best else {
                // Every remaining column is structurally or numerically empty.
                let positions: Vec<usize> = (0..m).filter(|&c| !col_done[c]).collect();
                let rows_left: Vec<usize> = (0..m).filter(|&r| !row_done[r]).collect();
                return Err(Singular {
                    positions,
                    rows: rows_left,
                });
            };

            row_done[p] = true;
            col_done[c] = true;
            f.pivot_row.push(p);
            f.pivot_col.push(c);
            f.diag.push(pv);

            let prow = std::mem::take(&mut rows[p]);
            for &(j, u) in &prow {
                if j != c {
                    f.u_idx.push(j);
                    f.u_val.push(u);
                    col_count[j] -= 1;
                }
            }
            f.u_start.push(f.u_idx.len());

            let col_rows = std::mem::take(&mut cols[c]);
            for &r in &col_rows {
                if row_done[r] {
                    continue;
                }
                let row = &mut rows[r];
                let Some(k) = row.iter().position(|(j, _)| *j == c) else {
                    continue;
                };
                let a = row.swap_remove(k).1;
                let l = a / pv;
                f.l_idx.push(r);
                f.l_val.push(l);
                for (i, &(j, _)) in row.iter().enumerate() {
                    pos[j] = i;
                }
                for &(j, u) in &prow {
                    if j == c {
                        continue;
                    }
                    if pos[j] != usize::MAX {
                        row[pos[j]].1 -= l * u;
                    } else {
                        row.push((j, -l * u));
                        cols[j].push(r);
                        col_count[j] += 1;
                    }
                }
                for &(j, _) in row.iter() {
                    pos[j] = usize::MAX;
                }
            }
            f.l_start.push(f.l_idx.len());
        }
        Ok(f)
    }

    pub(crate) fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = b` in place: on input `rhs` is indexed by row, on output by basis position.
    pub(crate) fn ftran(&self, rhs: &mut [f64], work: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let bp = rhs[self.pivot_row[k]];
            if bp != 0.0 {
                for i in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_idx[i]] -= self.l_val[i] * bp;
                }
            }
        }
        for k in (0..m).rev() {
            let mut s = rhs[self.pivot_row[k]];
            for i in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[i] * work[self.u_idx[i]];
            }
            work[self.pivot_col[k]] = s / self.diag[k];
        }
        rhs.copy_from_slice(work);
        for eta in &self.etas {
            let xr = rhs[eta.pos] / eta.pivot;
            rhs[eta.pos] = xr;
            if xr != 0.0 {
                for &(i, a) in &eta.entries {
                    rhs[i] -= a * xr;
                }
            }
        }
    }

    /// Solves `y' B = d'` in place: on input `rhs` is indexed by basis position, on output by row.
    pub(crate) fn btran(&self, rhs: &mut [f64], work: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = rhs[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * rhs[i];
            }
            rhs[eta.pos] = s / eta.pivot;
        }
        for k in 0..m {
            let wp = rhs[self.pivot_col[k]] / self.diag[k];
            work[self.pivot_row[k]] = wp;
            if wp != 0.0 {
                for i in self.u_start[k]..self.u_start[k + 1] {
                    rhs[self.u_idx[i]] -= self.u_val[i] * wp;
                }
            }
        }
        for k in (0..m).rev() {
            let mut s = 0.0;
            for i in self.l_start[k]..self.l_start[k + 1] {
                s += self.l_val[i] * work[self.l_idx[i]];
            }
            work[self.pivot_row[k]] -= s;
        }
        rhs.copy_from_slice(work);
    }

    /// Records the replacement of basis position `pos` by a column whose
    /// FTRAN image is `alpha`.
    pub(crate) fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, a)| i != pos && a.abs() > DROP_TOL)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|c| {
                (0..m)
                    .filter(|&r| a[r][c] != 0.0)
                    .map(|r| (r, a[r][c]))
                    .collect()
            })
            .collect()
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum())
            .collect()
    }

    fn vecmat(y: &[f64], a: &[Vec<f64>]) -> Vec<f64> {
        let m = a.len();
        (0..m)
            .map(|c| (0..m).map(|r| y[r] * a[r][c]).sum())
            .collect()
    }

    #[test]
    fn solves_small_systems() {
        let a = vec![
            vec![4.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0, 1.0],
            vec![1.0, 3.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 5.0],
        ];
        let f = BasisFactor::factorize(4, &dense_to_cols(&a)).unwrap();
        let b = vec![1.0, -2.0, 3.5, 0.25];
        let mut x = b.clone();
        let mut w = vec![0.0; 4];
        f.ftran(&mut x, &mut w);
        for (u, v) in matvec(&a, &x).iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        let mut y = b.clone();
        f.btran(&mut y, &mut w);
        for (u, v) in vecmat(&y, &a).iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_updates_track_column_replacement() {
        let mut a = vec![
            vec![2.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 3.0],
        ];
        let mut f = BasisFactor::factorize(3, &dense_to_cols(&a)).unwrap();
        let newcol = vec![1.0, -1.0, 2.0];
        let mut alpha = newcol.clone();
        let mut w = vec![0.0; 3];
        f.ftran(&mut alpha, &mut w);
        f.update(1, &alpha);
        for r in 0..3 {
            a[r][1] = newcol[r];
        }
        let b = vec![0.5, 1.0, -1.0];
        let mut x = b.clone();
        f.ftran(&mut x, &mut w);
        for (u, v) in matvec(&a, &x).iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        let mut y = b.clone();
        f.btran(&mut y, &mut w);
        for (u, v) in vecmat(&y, &a).iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_singular_basis() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(BasisFactor::factorize(2, &dense_to_cols(&a)).is_err());
        let z = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        let err = BasisFactor::factorize(2, &dense_to_cols(&z)).unwrap_err();
        assert_eq!(err.positions, vec![1]);
    }
}
