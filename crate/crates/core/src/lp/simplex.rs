//! Two-phase bounded primal simplex.
//!
//! Rows are brought to equality form `A x + s = b` with one logical column per
//! row whose bounds encode the relation. Rows whose logical cannot absorb the
//! initial residual receive an artificial column; phase one drives those to
//! zero. Pricing is Dantzig's rule with a Harris ratio test; after a run of
//! degenerate pivots the solver switches to Bland's rule until progress resumes.

use super::lu::BasisFactor;
use super::{certify, LinearProgram, LpError, PrimalDualSolution, Relation, Status, Tolerances};

/// Consecutive degenerate pivots tolerated before falling back to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;
/// Steps shorter than this count as degenerate.
const DEGENERATE_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Loc {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic without finite bounds; keeps its current value.
    Free,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Simplex<'t> {
    tol: &'t Tolerances,
    m: usize,
    n_struct: usize,
    col_start: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    x: Vec<f64>,
    loc: Vec<Loc>,
    basis: Vec<usize>,
    factor: BasisFactor,
    artificial_start: usize,
    iterations: usize,
    work: Vec<f64>,
}

pub(super) fn solve(lp: &LinearProgram, tol: &Tolerances) -> Result<PrimalDualSolution, LpError> {
    let mut s = Simplex::new(lp, tol)?;
    let n = lp.num_vars();
    let m = lp.num_constraints();

    if s.artificial_start < s.cost.len() {
        for j in 0..s.cost.len() {
            s.cost[j] = if j >= s.artificial_start { 1.0 } else { 0.0 };
        }
        s.run_phase()?;
        s.refactor()?;
        let infeas: f64 = (s.artificial_start..s.cost.len())
            .map(|j| s.x[j].max(0.0))
            .sum();
        let scale = 1.0 + s.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeas > 1e-7 * scale {
            return Ok(PrimalDualSolution {
                status: Status::Infeasible,
                objective: f64::NAN,
                primal: s.x[..n].to_vec(),
                duals: vec![0.0; m],
                reduced_costs: vec![0.0; n],
                iterations: s.iterations,
            });
        }
        for j in s.artificial_start..s.cost.len() {
            s.upper[j] = 0.0;
            if s.loc[j] != Loc::Lower && !matches!(s.loc[j], Loc::Basic(_)) {
                s.loc[j] = Loc::Lower;
                s.x[j] = 0.0;
            }
        }
        s.recompute_basics();
    }

    for j in 0..s.cost.len() {
        s.cost[j] = if j < n { lp.variables()[j].cost } else { 0.0 };
    }
    match s.run_phase()? {
        PhaseEnd::Unbounded => {
            return Ok(PrimalDualSolution {
                status: Status::Unbounded,
                objective: f64::NEG_INFINITY,
                primal: s.x[..n].to_vec(),
                duals: vec![0.0; m],
                reduced_costs: vec![0.0; n],
                iterations: s.iterations,
            });
        }
        PhaseEnd::Optimal => {}
    }

    s.refactor()?;
    let duals = s.duals();
    let primal = s.x[..n].to_vec();
    let reduced_costs = lp.reduced_costs(&duals);
    let sol = PrimalDualSolution {
        status: Status::Optimal,
        objective: lp.objective_value(&primal),
        primal,
        duals,
        reduced_costs,
        iterations: s.iterations,
    };

    let report = certify(lp, &sol, tol.certification);
    if !report.passed() {
        return Err(LpError::NumericalFailure {
            reason: format!("optimal basis failed self-certification: {report}"),
            iterations: s.iterations,
        });
    }
    Ok(sol)
}

impl<'t> Simplex<'t> {
    fn new(lp: &LinearProgram, tol: &'t Tolerances) -> Result<Self, LpError> {
        let n = lp.num_vars();
        let m = lp.num_constraints();

        // Column-major copy of A.
        let mut counts = vec![0usize; n];
        for c in lp.constraints() {
            for (v, _) in &c.coeffs {
                counts[v.0] += 1;
            }
        }
        let mut col_start = Vec::with_capacity(n + 2 * m + 1);
        col_start.push(0);
        for j in 0..n {
            col_start.push(col_start[j] + counts[j]);
        }
        let nnz = col_start[n];
        let mut col_idx = vec![0usize; nnz];
        let mut col_val = vec![0.0f64; nnz];
        let mut fill = col_start[..n].to_vec();
        for (i, c) in lp.constraints().iter().enumerate() {
            for (v, a) in &c.coeffs {
                col_idx[fill[v.0]] = i;
                col_val[fill[v.0]] = *a;
                fill[v.0] += 1;
            }
        }

        let mut lower: Vec<f64> = lp.variables().iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = lp.variables().iter().map(|v| v.upper).collect();
        let mut x = Vec::with_capacity(n + 2 * m);
        let mut loc = Vec::with_capacity(n + 2 * m);
        for v in lp.variables() {
            if v.lower.is_finite() {
                x.push(v.lower);
                loc.push(Loc::Lower);
            } else if v.upper.is_finite() {
                x.push(v.upper);
                loc.push(Loc::Upper);
            } else {
                x.push(0.0);
                loc.push(Loc::Free);
            }
        }

        // Logical columns.
        for (i, c) in lp.constraints().iter().enumerate() {
            col_idx.push(i);
            col_val.push(1.0);
            col_start.push(col_idx.len());
            let (lo, hi) = match c.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
            x.push(0.0);
            loc.push(Loc::Lower);
        }

        let rhs: Vec<f64> = lp.constraints().iter().map(|c| c.rhs).collect();
        let activity = lp.row_activities(&x[..n]);

        let mut basis = Vec::with_capacity(m);
        let artificial_start = n + m;
        for i in 0..m {
            let slack = n + i;
            let s = rhs[i] - activity[i];
            if s >= lower[slack] - tol.feasibility && s <= upper[slack] + tol.feasibility {
                x[slack] = s;
                loc[slack] = Loc::Basic(i);
                basis.push(slack);
            } else {
                let (bound, at) = if s < lower[slack] {
                    (lower[slack], Loc::Lower)
                } else {
                    (upper[slack], Loc::Upper)
                };
                x[slack] = bound;
                loc[slack] = at;
                let residual = s - bound;
                let art = x.len();
                col_idx.push(i);
                col_val.push(residual.signum());
                col_start.push(col_idx.len());
                lower.push(0.0);
                upper.push(f64::INFINITY);
                x.push(residual.abs());
                loc.push(Loc::Basic(i));
                basis.push(art);
            }
        }
        let ncols = x.len();

        let mut s = Simplex {
            tol,
            m,
            n_struct: n,
            col_start,
            col_idx,
            col_val,
            lower,
            upper,
            cost: vec![0.0; ncols],
            rhs,
            x,
            loc,
            basis,
            factor: BasisFactor::default(),
            artificial_start,
            iterations: 0,
            work: vec![0.0; m],
        };
        s.refactor()?;
        Ok(s)
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_start[j]..self.col_start[j + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.col_val[range].iter().copied())
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let cols: Vec<Vec<(usize, f64)>> = self
            .basis
            .iter()
            .map(|&j| self.column(j).collect())
            .collect();
        match BasisFactor::factorize(self.m, &cols) {
            Ok(f) => self.factor = f,
            Err(singular) => {
                // Replace the dependent columns by logicals of the uncovered rows.
                log::debug!(
                    "singular basis at iteration {}: repairing {} positions",
                    self.iterations,
                    singular.positions.len()
                );
                for (&pos, &row) in singular.positions.iter().zip(&singular.rows) {
                    let out = self.basis[pos];
                    self.park_nonbasic(out);
                    let slack = self.n_struct + row;
                    if let Loc::Basic(other) = self.loc[slack] {
                        // Cannot happen: a basic logical always pivots on its own row.
                        return Err(LpError::NumericalFailure {
                            reason: format!(
                                "logical of row {row} already basic at position {other}"
                            ),
                            iterations: self.iterations,
                        });
                    }
                    self.basis[pos] = slack;
                    self.loc[slack] = Loc::Basic(pos);
                }
                let cols: Vec<Vec<(usize, f64)>> = self
                    .basis
                    .iter()
                    .map(|&j| self.column(j).collect())
                    .collect();
                self.factor = BasisFactor::factorize(self.m, &cols).map_err(|_| {
                    LpError::NumericalFailure {
                        reason: "basis repair left a singular basis".into(),
                        iterations: self.iterations,
                    }
                })?;
            }
        }
        self.recompute_basics();
        Ok(())
    }

    fn park_nonbasic(&mut self, j: usize) {
        let (lo, hi, v) = (self.lower[j], self.upper[j], self.x[j]);
        if lo.is_finite() && (!hi.is_finite() || (v - lo).abs() <= (hi - v).abs()) {
            self.x[j] = lo;
            self.loc[j] = Loc::Lower;
        } else if hi.is_finite() {
            self.x[j] = hi;
            self.loc[j] = Loc::Upper;
        } else {
            self.loc[j] = Loc::Free;
        }
    }

    fn recompute_basics(&mut self) {
        let mut r = self.rhs.clone();
        for j in 0..self.x.len() {
            if matches!(self.loc[j], Loc::Basic(_)) {
                continue;
            }
            let xj = self.x[j];
            if xj != 0.0 {
                for (i, a) in self.column(j) {
                    r[i] -= a * xj;
                }
            }
        }
        self.factor.ftran(&mut r, &mut self.work);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] = r[pos];
        }
    }

    fn duals(&mut self) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.factor.btran(&mut y, &mut self.work);
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        for (i, a) in self.column(j) {
            d -= a * y[i];
        }
        d
    }

    fn run_phase(&mut self) -> Result<PhaseEnd, LpError> {
        let ncols = self.x.len();
        let mut degenerate_run = 0usize;
        let mut alpha = vec![0.0; self.m];
        // Iteration at which a ray was last seen, to confirm it on a fresh factor.
        let mut ray_seen: Option<usize> = None;
        loop {
            if self.iterations >= self.tol.max_iterations {
                return Err(LpError::IterationLimit(self.tol.max_iterations));
            }
            if self.factor.num_updates() >= self.tol.refactor_interval {
                self.refactor()?;
            }
            let bland = degenerate_run >= DEGENERATE_LIMIT;
            let y = self.duals();

            // Pricing.
            let mut entering: Option<(usize, f64, f64)> = None; // (col, dir, |d|)
            for j in 0..ncols {
                let dir = match self.loc[j] {
                    Loc::Basic(_) => continue,
                    _ if self.lower[j] == self.upper[j] => continue,
                    Loc::Lower => {
                        let d = self.reduced_cost(j, &y);
                        if d < -self.tol.optimality {
                            (1.0, -d)
                        } else {
                            continue;
                        }
                    }
                    Loc::Upper => {
                        let d = self.reduced_cost(j, &y);
                        if d > self.tol.optimality {
                            (-1.0, d)
                        } else {
                            continue;
                        }
                    }
                    Loc::Free => {
                        let d = self.reduced_cost(j, &y);
                        if d.abs() > self.tol.optimality {
                            (-d.signum(), d.abs())
                        } else {
                            continue;
                        }
                    }
                };
                if bland {
                    entering = Some((j, dir.0, dir.1));
                    break;
                }
                if entering.map_or(true, |(_, _, best)| dir.1 > best) {
                    entering = Some((j, dir.0, dir.1));
                }
            }
            let Some((q, dir, _)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            alpha.iter_mut().for_each(|a| *a = 0.0);
            for (i, a) in self.column(q) {
                alpha[i] = a;
            }
            self.factor.ftran(&mut alpha, &mut self.work);

            // Ratio test.
            let leave = if bland {
                self.ratio_bland(&alpha, dir)
            } else {
                self.ratio_harris(&alpha, dir)
            };
            let range = self.upper[q] - self.lower[q];
            let step_flip = range.is_finite() && leave.map_or(true, |(_, t)| range <= t);

            let theta = if step_flip {
                range
            } else if let Some((_, t)) = leave {
                t
            } else if ray_seen == Some(self.iterations) {
                return Ok(PhaseEnd::Unbounded);
            } else {
                ray_seen = Some(self.iterations);
                self.refactor()?;
                continue;
            };

            // Move.
            self.x[q] += dir * theta;
            for (pos, &j) in self.basis.iter().enumerate() {
                self.x[j] -= dir * theta * alpha[pos];
            }
            self.iterations += 1;
            if theta <= DEGENERATE_STEP {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            if step_flip {
                if dir > 0.0 {
                    self.x[q] = self.upper[q];
                    self.loc[q] = Loc::Upper;
                } else {
                    self.x[q] = self.lower[q];
                    self.loc[q] = Loc::Lower;
                }
                continue;
            }

            let (r, _) = leave.expect("checked above");
            let out = self.basis[r];
            let rate = -dir * alpha[r];
            if rate < 0.0 {
                self.x[out] = self.lower[out];
                self.loc[out] = Loc::Lower;
            } else {
                self.x[out] = self.upper[out];
                self.loc[out] = Loc::Upper;
            }
            self.basis[r] = q;
            self.loc[q] = Loc::Basic(r);
            self.factor.update(r, &alpha);
        }
    }

    /// Candidate ratio for basis position `pos` with relaxation `slack`.
    fn ratio(&self, pos: usize, alpha: f64, dir: f64, slack: f64) -> Option<f64> {
        if alpha.abs() < self.tol.pivot {
            return None;
        }
        let j = self.basis[pos];
        let rate = -dir * alpha;
        if rate < 0.0 && self.lower[j].is_finite() {
            Some(((self.x[j] - self.lower[j] + slack) / -rate).max(0.0))
        } else if rate > 0.0 && self.upper[j].is_finite() {
            Some(((self.upper[j] - self.x[j] + slack) / rate).max(0.0))
        } else {
            None
        }
    }

    fn ratio_harris(&self, alpha: &[f64], dir: f64) -> Option<(usize, f64)> {
        let mut bound = f64::INFINITY;
        for pos in 0..self.m {
            if let Some(t) = self.ratio(pos, alpha[pos], dir, self.tol.feasibility) {
                bound = bound.min(t);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for pos in 0..self.m {
            if let Some(t) = self.ratio(pos, alpha[pos], dir, 0.0) {
                if t <= bound && best.map_or(true, |(_, _, a)| alpha[pos].abs() > a) {
                    best = Some((pos, t, alpha[pos].abs()));
                }
            }
        }
        best.map(|(pos, t, _)| (pos, t))
    }

    fn ratio_bland(&self, alpha: &[f64], dir: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for pos in 0..self.m {
            if let Some(t) = self.ratio(pos, alpha[pos], dir, 0.0) {
                let better = match best {
                    None => true,
                    Some((bp, bt)) => {
                        t < bt - DEGENERATE_STEP
                            || (t <= bt + DEGENERATE_STEP && self.basis[pos] < self.basis[bp])
                    }
                };
                if better {
                    best = Some((pos, t));
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use crate::lp::{LinearProgram, Relation, Status};

    #[test]
    fn single_lower_bound_row() {
        let mut lp = LinearProgram::new();
        let x = lp
            .add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0)
            .unwrap();
        let c = lp
            .add_constraint("c", [(x, 1.0)], Relation::Ge, 1.0)
            .unwrap();
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.value(x) - 1.0).abs() < 1e-12);
        assert!((sol.dual(c) - 1.0).abs() < 1e-12);
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_row_dual_is_negative_marginal_value() {
        let mut lp = LinearProgram::new();
        let d = lp.add_var("d", 0.0, f64::INFINITY, -1.0).unwrap();
        let c = lp
            .add_constraint("cap", [(d, 1.0)], Relation::Le, 25.0)
            .unwrap();
        let sol = lp.solve().unwrap();
        assert!((sol.value(d) - 25.0).abs() < 1e-12);
        assert!((sol.dual(c) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 1.0, 1.0).unwrap();
        lp.add_constraint("c", [(x, 1.0)], Relation::Ge, 2.0)
            .unwrap();
        assert_eq!(lp.solve().unwrap().status, Status::Infeasible);

        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, -1.0).unwrap();
        let y = lp.add_var("y", 0.0, f64::INFINITY, 0.0).unwrap();
        lp.add_constraint("c", [(x, 1.0), (y, -1.0)], Relation::Le, 1.0)
            .unwrap();
        assert_eq!(lp.solve().unwrap().status, Status::Unbounded);
    }

    #[test]
    fn textbook_problem_with_equality_and_free_column() {
        // max 3a + 2b  s.t. a + b <= 4, a + 3b <= 6, a - z = 1 (z free), a,b >= 0
        let mut lp = LinearProgram::new();
        let a = lp.add_var("a", 0.0, f64::INFINITY, -3.0).unwrap();
        let b = lp.add_var("b", 0.0, f64::INFINITY, -2.0).unwrap();
        let z = lp
            .add_var("z", f64::NEG_INFINITY, f64::INFINITY, 0.0)
            .unwrap();
        let r1 = lp
            .add_constraint("r1", [(a, 1.0), (b, 1.0)], Relation::Le, 4.0)
            .unwrap();
        lp.add_constraint("r2", [(a, 1.0), (b, 3.0)], Relation::Le, 6.0)
            .unwrap();
        lp.add_constraint("r3", [(a, 1.0), (z, -1.0)], Relation::Eq, 1.0)
            .unwrap();
        let sol = lp.solve().unwrap();
        assert!((sol.objective + 12.0).abs() < 1e-9);
        assert!((sol.value(a) - 4.0).abs() < 1e-9);
        assert!((sol.value(z) - 3.0).abs() < 1e-9);
        assert!((sol.dual(r1) + 3.0).abs() < 1e-9);
    }
}
