//! Independent optimality certificates for primal/dual pairs.
//!
//! Nothing here trusts the solver: reduced costs are recomputed from the model
//! and the dual objective is rebuilt from bounds, so a passing report is a KKT
//! proof up to the stated tolerance.

use std::fmt;

use super::{ConId, LinearProgram, PrimalDualSolution, Relation, Status};

/// Scaled KKT residuals of a primal/dual pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    /// Largest row or bound violation, each relative to `1 + |bound|`.
    pub primal_infeasibility: f64,
    /// Largest dual sign violation, relative to `1 + |c_j|` for columns.
    pub dual_infeasibility: f64,
    /// Largest complementary-slackness product, relative to `1 + |objective|`.
    pub complementarity: f64,
    /// `|primal - dual| / (1 + |primal|)`.
    pub duality_gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub tolerance: f64,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        let t = self.tolerance;
        self.primal_infeasibility <= t
            && self.dual_infeasibility <= t
            && self.complementarity <= t
            && self.duality_gap <= t
    }

    fn failed(tolerance: f64) -> Self {
        Self {
            primal_infeasibility: f64::INFINITY,
            dual_infeasibility: f64::INFINITY,
            complementarity: f64::INFINITY,
            duality_gap: f64::INFINITY,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            tolerance,
        }
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "primal {:.2e}, dual {:.2e}, complementarity {:.2e}, gap {:.2e} (tol {:.1e})",
            self.primal_infeasibility,
            self.dual_infeasibility,
            self.complementarity,
            self.duality_gap,
            self.tolerance
        )
    }
}

/// Checks `sol` against the KKT conditions of `lp`.
pub fn certify(lp: &LinearProgram, sol: &PrimalDualSolution, tolerance: f64) -> CertificateReport {
    if sol.status != Status::Optimal {
        return CertificateReport::failed(tolerance);
    }
    certify_pair(lp, &sol.primal, &sol.duals, tolerance)
}

fn certify_pair(lp: &LinearProgram, x: &[f64], y: &[f64], tolerance: f64) -> CertificateReport {
    let primal_objective = lp.objective_value(x);
    let scale_obj = 1.0 + primal_objective.abs();
    let activity = lp.row_activities(x);
    let d = lp.reduced_costs(y);

    let mut pinf = 0.0f64;
    let mut dinf = 0.0f64;
    let mut comp = 0.0f64;
    let mut dual_objective = 0.0;

    for ((c, &act), &yi) in lp.constraints().iter().zip(&activity).zip(y) {
        let slack = c.rhs - act;
        let viol = match c.relation {
            Relation::Le => (-slack).max(0.0),
            Relation::Ge => slack.max(0.0),
            Relation::Eq => slack.abs(),
        };
        pinf = pinf.max(viol / (1.0 + c.rhs.abs()));
        let sign_viol = match c.relation {
            Relation::Le => yi.max(0.0),
            Relation::Ge => (-yi).max(0.0),
            Relation::Eq => 0.0,
        };
        dinf = dinf.max(sign_viol);
        if c.relation != Relation::Eq {
            comp = comp.max((yi * slack).abs() / scale_obj);
        }
        dual_objective += c.rhs * yi;
    }

    for ((v, &xj), &dj) in lp.variables().iter().zip(x).zip(&d) {
        let below = (v.lower - xj).max(0.0);
        let above = (xj - v.upper).max(0.0);
        let bound = if below > 0.0 { v.lower } else { v.upper };
        if below > 0.0 || above > 0.0 {
            pinf = pinf.max(below.max(above) / (1.0 + bound.abs()));
        }
        let cscale = 1.0 + v.cost.abs();
        if dj > 0.0 {
            if v.lower.is_finite() {
                dual_objective += v.lower * dj;
                comp = comp.max(dj * (xj - v.lower).abs() / scale_obj);
            } else {
                dinf = dinf.max(dj / cscale);
            }
        } else if dj < 0.0 {
            if v.upper.is_finite() {
                dual_objective += v.upper * dj;
                comp = comp.max(-dj * (v.upper - xj).abs() / scale_obj);
            } else {
                dinf = dinf.max(-dj / cscale);
            }
        }
    }

    CertificateReport {
        primal_infeasibility: pinf,
        dual_infeasibility: dinf,
        complementarity: comp,
        duality_gap: (primal_objective - dual_objective).abs() / scale_obj,
        primal_objective,
        dual_objective,
        tolerance,
    }
}

/// Certifies `primal` with the duals of the rows in `fixed` pinned to the
/// given values.
///
/// The remaining row duals are chosen by an auxiliary LP that minimizes the
/// total dual infeasibility while honouring complementary slackness with
/// `primal`; the returned report is the ordinary certificate of the completed
/// pair. Returns the completed dual vector alongside the report.
pub fn certify_with_fixed_duals(
    lp: &LinearProgram,
    primal: &[f64],
    fixed: &[(ConId, f64)],
    tolerance: f64,
) -> (CertificateReport, Vec<f64>) {
    let m = lp.num_constraints();
    let mut y = vec![0.0; m];
    let mut is_fixed = vec![false; m];
    for &(c, v) in fixed {
        y[c.0] = v;
        is_fixed[c.0] = true;
    }

    let activity = lp.row_activities(primal);
    let mut aux = LinearProgram::new();
    let mut yvar = vec![None; m];
    for (i, c) in lp.constraints().iter().enumerate() {
        if is_fixed[i] {
            continue;
        }
        let slack = c.rhs - activity[i];
        let binding = slack.abs() <= tolerance * (1.0 + c.rhs.abs());
        let (lo, hi) = match (c.relation, binding) {
            (Relation::Eq, _) => (f64::NEG_INFINITY, f64::INFINITY),
            (_, false) => continue,
            (Relation::Le, true) => (f64::NEG_INFINITY, 0.0),
            (Relation::Ge, true) => (0.0, f64::INFINITY),
        };
        yvar[i] = Some(
            aux.add_var(format!("y{i}"), lo, hi, 0.0)
                .expect("fresh name"),
        );
    }

    // Column j contributes a_j' y (relation) c_j - a_j' y_fixed.
    let mut col_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_vars()];
    for (i, c) in lp.constraints().iter().enumerate() {
        for (v, a) in &c.coeffs {
            col_rows[v.0].push((i, *a));
        }
    }
    for (j, v) in lp.variables().iter().enumerate() {
        let xj = primal[j];
        let at_lower =
            v.lower.is_finite() && (xj - v.lower).abs() <= tolerance * (1.0 + v.lower.abs());
        let at_upper =
            v.upper.is_finite() && (v.upper - xj).abs() <= tolerance * (1.0 + v.upper.abs());
        if at_lower && at_upper {
            continue;
        }
        let mut rhs = v.cost;
        let mut coeffs = Vec::new();
        for &(i, a) in &col_rows[j] {
            match yvar[i] {
                Some(id) => coeffs.push((id, a)),
                None => rhs -= a * y[i],
            }
        }
        let name = &v.name;
        if at_lower {
            // d_j >= 0  <=>  a'y <= c
            let e = aux
                .add_var(format!("e[{name}]"), 0.0, f64::INFINITY, 1.0)
                .expect("fresh name");
            coeffs.push((e, -1.0));
            aux.add_constraint(format!("d[{name}]"), coeffs, Relation::Le, rhs)
                .expect("valid row");
        } else if at_upper {
            let e = aux
                .add_var(format!("e[{name}]"), 0.0, f64::INFINITY, 1.0)
                .expect("fresh name");
            coeffs.push((e, 1.0));
            aux.add_constraint(format!("d[{name}]"), coeffs, Relation::Ge, rhs)
                .expect("valid row");
        } else {
            let ep = aux
                .add_var(format!("e+[{name}]"), 0.0, f64::INFINITY, 1.0)
                .expect("fresh name");
            let en = aux
                .add_var(format!("e-[{name}]"), 0.0, f64::INFINITY, 1.0)
                .expect("fresh name");
            coeffs.push((ep, 1.0));
            coeffs.push((en, -1.0));
            aux.add_constraint(format!("d[{name}]"), coeffs, Relation::Eq, rhs)
                .expect("valid row");
        }
    }

    match aux.solve() {
        Ok(sol) if sol.is_optimal() => {
            for (i, id) in yvar.iter().enumerate() {
                if let Some(id) = id {
                    y[i] = sol.value(*id);
                }
            }
            (certify_pair(lp, primal, &y, tolerance), y)
        }
        _ => (CertificateReport::failed(tolerance), y),
    }
}
