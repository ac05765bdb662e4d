//! Linear programming layer.
//!
//! Problems are always minimizations over named columns with simple bounds and
//! named rows. The bundled solver is a bounded revised simplex method over a
//! sparse LU factorization of the basis, so every optimal answer is a vertex
//! and the row duals come straight from the final basis. Nodal prices are read
//! from those duals, which is why [`certify`] exists as an independent KKT check.

mod certify;
mod lu;
mod mps;
mod simplex;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use certify::{certify, certify_with_fixed_duals, CertificateReport};
pub use mps::write_mps;

/// Index of a column in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Index of a row in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate constraint name `{0}`")]
    DuplicateConstraint(String),
    #[error("constraint `{name}` references unknown variable index {index}")]
    UnknownVariable { name: String, index: usize },
    #[error("constraint `{0}` has a non-finite right-hand side")]
    NonFiniteRhs(String),
    #[error("variable `{name}` has invalid bounds [{lower}, {upper}]")]
    InvalidBounds {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("variable `{0}` has a non-finite objective coefficient")]
    NonFiniteCost(String),
    #[error("numerical failure after {iterations} iterations: {reason}")]
    NumericalFailure { reason: String, iterations: usize },
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
}

/// A minimization LP: `min c'x  s.t.  a_i x (<=|=|>=) b_i,  l <= x <= u`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    vars: Vec<Variable>,
    cons: Vec<Constraint>,
    var_names: HashMap<String, VarId>,
    con_names: HashMap<String, ConId>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        cost: f64,
    ) -> Result<VarId, LpError> {
        let name = name.into();
        if lower.is_nan()
            || upper.is_nan()
            || lower > upper
            || lower == f64::INFINITY
            || upper == f64::NEG_INFINITY
        {
            return Err(LpError::InvalidBounds { name, lower, upper });
        }
        if !cost.is_finite() {
            return Err(LpError::NonFiniteCost(name));
        }
        if self.var_names.contains_key(&name) {
            return Err(LpError::DuplicateVariable(name));
        }
        let id = VarId(self.vars.len());
        self.var_names.insert(name.clone(), id);
        self.vars.push(Variable {
            name,
            lower,
            upper,
            cost,
        });
        Ok(id)
    }

    /// Adds a row. Repeated column references are summed and exact zeros dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<ConId, LpError> {
        let name = name.into();
        if !rhs.is_finite() {
            return Err(LpError::NonFiniteRhs(name));
        }
        if self.con_names.contains_key(&name) {
            return Err(LpError::DuplicateConstraint(name));
        }
        let mut row: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in coeffs {
            if v.0 >= self.vars.len() {
                return Err(LpError::UnknownVariable { name, index: v.0 });
            }
            match row.iter_mut().find(|(w, _)| *w == v) {
                Some(entry) => entry.1 += a,
                None => row.push((v, a)),
            }
        }
        row.retain(|(_, a)| *a != 0.0);
        let id = ConId(self.cons.len());
        self.con_names.insert(name.clone(), id);
        self.cons.push(Constraint {
            name,
            coeffs: row,
            relation,
            rhs,
        });
        Ok(id)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.cons.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.cons
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn constraint(&self, id: ConId) -> &Constraint {
        &self.cons[id.0]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_names.get(name).copied()
    }

    pub fn con_id(&self, name: &str) -> Option<ConId> {
        self.con_names.get(name).copied()
    }

    /// Replaces every objective coefficient by `factor` times itself.
    pub fn scale_objective(&mut self, factor: f64) {
        for v in &mut self.vars {
            v.cost *= factor;
        }
    }

    pub fn set_cost(&mut self, id: VarId, cost: f64) {
        self.vars[id.0].cost = cost;
    }

    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) {
        self.vars[id.0].lower = lower;
        self.vars[id.0].upper = upper;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, xi)| v.cost * xi).sum()
    }

    /// Row activity `a_i x` for every row.
    pub fn row_activities(&self, x: &[f64]) -> Vec<f64> {
        self.cons
            .iter()
            .map(|c| c.coeffs.iter().map(|(v, a)| a * x[v.0]).sum())
            .collect()
    }

    /// Reduced costs `c_j - sum_i a_ij y_i`.
    pub fn reduced_costs(&self, duals: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = self.vars.iter().map(|v| v.cost).collect();
        for (c, y) in self.cons.iter().zip(duals) {
            if *y == 0.0 {
                continue;
            }
            for (v, a) in &c.coeffs {
                d[v.0] -= a * y;
            }
        }
        d
    }

    pub fn solve(&self) -> Result<PrimalDualSolution, LpError> {
        self.solve_with(&Tolerances::default())
    }

    pub fn solve_with(&self, tol: &Tolerances) -> Result<PrimalDualSolution, LpError> {
        simplex::solve(self, tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
        })
    }
}

/// Solver tolerances.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Absolute primal feasibility tolerance used while pivoting.
    pub feasibility: f64,
    /// Absolute reduced-cost tolerance used for pricing.
    pub optimality: f64,
    /// Smallest pivot element accepted in the ratio test.
    pub pivot: f64,
    /// Relative tolerance used by [`certify`] when the solver self-checks.
    pub certification: f64,
    pub max_iterations: usize,
    /// Number of basis updates between fresh LU factorizations.
    pub refactor_interval: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-9,
            optimality: 1e-9,
            pivot: 1e-9,
            certification: 1e-6,
            max_iterations: 200_000,
            refactor_interval: 100,
        }
    }
}

/// Result of [`LinearProgram::solve`]. Vectors are indexed by [`VarId`] and
/// [`ConId`]; they are only meaningful when `status` is [`Status::Optimal`].
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualSolution {
    pub status: Status,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// `y_i = d(objective)/d(rhs_i)` for every row.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl PrimalDualSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, id: VarId) -> f64 {
        self.primal[id.0]
    }

    pub fn dual(&self, id: ConId) -> f64 {
        self.duals[id.0]
    }

    pub fn value_by_name(&self, lp: &LinearProgram, name: &str) -> Option<f64> {
        lp.var_id(name).map(|id| self.value(id))
    }

    pub fn dual_by_name(&self, lp: &LinearProgram, name: &str) -> Option<f64> {
        lp.con_id(name).map(|id| self.dual(id))
    }
}
