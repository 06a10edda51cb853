//! Dense linear programs, a two-phase simplex backend with dual multipliers,
//! and a cut-generation driver for LPs whose constraint families are only
//! available through a separation oracle.
//!
//! Dual multipliers follow one sense-independent convention: `duals[i]` is the
//! sensitivity of the optimal objective to the right-hand side of row `i`, and
//! `reduced_costs[j] = c[j] - sum_i a[i][j] * duals[i]`.

mod cuts;
mod simplex;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cuts::{default_max_rounds, solve_with_cuts, Cut, CutOutcome, CutStatus, SeparationOracle};

/// Primal feasibility and violation tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Optimality / duality-gap tolerance used when certifying a solution.
pub const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }

    /// Amount by which `lhs rel rhs` is violated (0 when satisfied).
    pub fn violation(self, lhs: f64, rhs: f64) -> f64 {
        match self {
            Relation::Le => (lhs - rhs).max(0.0),
            Relation::Ge => (rhs - lhs).max(0.0),
            Relation::Eq => (lhs - rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x)
    }
}

/// Dense LP: optimize `objective . x` subject to rows and per-variable bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// New LP with every variable bounded to `[0, +inf)`.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_free(&mut self, var: usize) {
        self.set_bounds(var, f64::NEG_INFINITY, f64::INFINITY);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Dimension(format!(
                "bounds have lengths {}/{} but the LP has {n} variables",
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("non-finite objective coefficient".into()));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::Invalid(format!("row {i} has non-finite data")));
            }
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] == f64::INFINITY {
                return Err(Error::Invalid(format!("variable {j} has invalid bounds")));
            }
            if self.upper[j] == f64::NEG_INFINITY {
                return Err(Error::Invalid(format!("variable {j} has invalid bounds")));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest absolute violation of any row or bound at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|r| r.relation.violation(r.lhs(x), r.rhs))
            .fold(0.0, f64::max);
        let bounds = (0..self.num_vars())
            .map(|j| (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    fn rhs_scale(&self) -> f64 {
        1.0 + self
            .constraints
            .iter()
            .map(|r| r.rhs.abs())
            .fold(0.0, f64::max)
    }

    /// Plain-text dump in an LP-file-like layout, variables named `v0..vk`.
    pub fn to_lp_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{}",
            match self.sense {
                Sense::Minimize => "minimize",
                Sense::Maximize => "maximize",
            }
        );
        let _ = writeln!(out, " obj: {}", linear_expr(&self.objective));
        let _ = writeln!(out, "subject to");
        for (i, row) in self.constraints.iter().enumerate() {
            let _ = writeln!(
                out,
                " c{i}: {} {} {}",
                linear_expr(&row.coeffs),
                row.relation.symbol(),
                row.rhs
            );
        }
        let _ = writeln!(out, "bounds");
        for j in 0..self.num_vars() {
            let _ = writeln!(out, " {} <= v{j} <= {}", self.lower[j], self.upper[j]);
        }
        let _ = writeln!(out, "end");
        out
    }
}

fn linear_expr(coeffs: &[f64]) -> String {
    let terms: Vec<String> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, c)| format!("{c} v{j}"))
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn failed(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        LpSolution {
            status,
            x: vec![0.0; n],
            duals: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            objective: f64::NAN,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Returns `self` when optimal, otherwise an [`Error::Lp`] naming `context`.
    pub fn require_optimal(self, context: &str) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::lp(self.status, context))
        }
    }
}

/// Optimality certificate of a primal/dual pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
}

/// Evaluates primal feasibility, dual feasibility and the Lagrangian duality gap
/// of `sol` for `lp`, independent of how `sol` was produced.
pub fn certify(lp: &LinearProgram, sol: &LpSolution) -> Certificate {
    let flip = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let n = lp.num_vars();
    let y: Vec<f64> = sol.duals.iter().map(|d| flip * d).collect();
    let mut dual_residual: f64 = 0.0;
    let mut dual_obj = 0.0;
    for (row, yi) in lp.constraints.iter().zip(&y) {
        let wrong_sign = match row.relation {
            Relation::Ge => (-yi).max(0.0),
            Relation::Le => yi.max(0.0),
            Relation::Eq => 0.0,
        };
        dual_residual = dual_residual.max(wrong_sign);
        dual_obj += row.rhs * yi;
    }
    for j in 0..n {
        let mut r = flip * lp.objective[j];
        for (row, yi) in lp.constraints.iter().zip(&y) {
            r -= row.coeffs[j] * yi;
        }
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if r >= 0.0 {
            if lo.is_finite() {
                dual_obj += r * lo;
            } else {
                dual_residual = dual_residual.max(r);
            }
        } else if hi.is_finite() {
            dual_obj += r * hi;
        } else {
            dual_residual = dual_residual.max(-r);
        }
    }
    let primal_obj = flip * lp.objective_value(&sol.x);
    Certificate {
        primal_residual: lp.primal_residual(&sol.x),
        dual_residual,
        primal_objective: flip * primal_obj,
        dual_objective: flip * dual_obj,
        gap: (primal_obj - dual_obj).abs(),
    }
}

pub(crate) fn certificate_ok(lp: &LinearProgram, sol: &LpSolution) -> bool {
    let cert = certify(lp, sol);
    let scale = lp.rhs_scale();
    cert.primal_residual <= FEAS_TOL * scale
        && cert.dual_residual
            <= FEAS_TOL * (1.0 + lp.objective.iter().map(|c| c.abs()).fold(0.0, f64::max))
        && cert.gap <= GAP_TOL * (1.0 + cert.primal_objective.abs())
}

/// Solves `lp`. Data errors are returned as `Err`; solver outcomes, including
/// numerical trouble, are reported through [`LpSolution::status`].
///
/// Optimal answers are certified against their own duals before being
/// returned; a solution that fails the certificate is reported as
/// [`LpStatus::NumericalFailure`].
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    if simplex::prefers_dual(lp) {
        if let Some(sol) = simplex::solve_via_dual(lp) {
            return Ok(sol);
        }
    }
    let sol = simplex::solve_direct(lp);
    if sol.is_optimal() && !certificate_ok(lp, &sol) {
        log::debug!(
            "simplex answer failed certification: {:?}",
            certify(lp, &sol)
        );
        return Ok(LpSolution {
            status: LpStatus::NumericalFailure,
            ..sol
        });
    }
    Ok(sol)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
