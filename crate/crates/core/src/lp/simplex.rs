//! Dense two-phase primal simplex on an explicit tableau.
//!
//! The final basis is re-factorized from the original standard-form columns
//! so the reported primal values and duals do not carry the round-off
//! accumulated across pivots.

use super::{certificate_ok, LinearProgram, LpSolution, LpStatus, Relation, Sense};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;

/// How an original variable is expressed through standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = shift + col
    Shift { col: usize, shift: f64 },
    /// x = shift - col
    Mirror { col: usize, shift: f64 },
    /// x = pos - neg
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    m: usize,
    ncols: usize,
    /// Row-major m x ncols.
    a: Vec<f64>,
    b: Vec<f64>,
    cost: Vec<f64>,
    artificial: Vec<bool>,
    basis: Vec<usize>,
    vars: Vec<VarMap>,
    /// Sign applied to each original row (only the first `orig_rows` rows).
    row_sign: Vec<f64>,
    orig_rows: usize,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Option<Self> {
        let n = lp.num_vars();
        let sense = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut vars = Vec::with_capacity(n);
        let mut cost = Vec::new();
        // (column, upper limit) for shifted variables with a finite upper bound
        let mut upper_rows = Vec::new();
        for j in 0..n {
            let (lo, hi) = (lp.lower[j], lp.upper[j]);
            let c = sense * lp.objective[j];
            if lo.is_finite() {
                if hi < lo {
                    return None;
                }
                let col = cost.len();
                cost.push(c);
                vars.push(VarMap::Shift { col, shift: lo });
                if hi.is_finite() {
                    upper_rows.push((col, hi - lo));
                }
            } else if hi.is_finite() {
                let col = cost.len();
                cost.push(-c);
                vars.push(VarMap::Mirror { col, shift: hi });
            } else {
                let pos = cost.len();
                cost.push(c);
                cost.push(-c);
                vars.push(VarMap::Split { pos, neg: pos + 1 });
            }
        }
        let nstruct = cost.len();

        let orig_rows = lp.num_rows();
        let m = orig_rows + upper_rows.len();
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(m);
        for con in &lp.constraints {
            let mut coeffs = vec![0.0; nstruct];
            let mut rhs = con.rhs;
            for (j, &a) in con.coeffs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                match vars[j] {
                    VarMap::Shift { col, shift } => {
                        coeffs[col] += a;
                        rhs -= a * shift;
                    }
                    VarMap::Mirror { col, shift } => {
                        coeffs[col] -= a;
                        rhs -= a * shift;
                    }
                    VarMap::Split { pos, neg } => {
                        coeffs[pos] += a;
                        coeffs[neg] -= a;
                    }
                }
            }
            rows.push((coeffs, con.relation, rhs));
        }
        for &(col, limit) in &upper_rows {
            let mut coeffs = vec![0.0; nstruct];
            coeffs[col] = 1.0;
            rows.push((coeffs, Relation::Le, limit));
        }

        let mut row_sign = vec![1.0; m];
        for (i, row) in rows.iter_mut().enumerate() {
            if row.2 < 0.0 {
                row_sign[i] = -1.0;
                row.0.iter_mut().for_each(|v| *v = -*v);
                row.2 = -row.2;
                row.1 = match row.1 {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }

        let slacks = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let arts = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let ncols = nstruct + slacks + arts;
        let mut a = vec![0.0; m * ncols];
        let mut b = vec![0.0; m];
        let mut artificial = vec![false; ncols];
        let mut basis = vec![0; m];
        cost.resize(ncols, 0.0);
        let mut next_slack = nstruct;
        let mut next_art = nstruct + slacks;
        for (i, (coeffs, rel, rhs)) in rows.into_iter().enumerate() {
            a[i * ncols..i * ncols + nstruct].copy_from_slice(&coeffs);
            b[i] = rhs;
            match rel {
                Relation::Le => {
                    a[i * ncols + next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    a[i * ncols + next_slack] = -1.0;
                    next_slack += 1;
                    a[i * ncols + next_art] = 1.0;
                    artificial[next_art] = true;
                    basis[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    a[i * ncols + next_art] = 1.0;
                    artificial[next_art] = true;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }
        Some(StandardForm {
            m,
            ncols,
            a,
            b,
            cost,
            artificial,
            basis,
            vars,
            row_sign,
            orig_rows,
        })
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Tableau<'a> {
    sf: &'a StandardForm,
    t: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    d: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

impl<'a> Tableau<'a> {
    fn new(sf: &'a StandardForm) -> Self {
        Tableau {
            sf,
            t: sf.a.clone(),
            rhs: sf.b.clone(),
            basis: sf.basis.clone(),
            d: vec![0.0; sf.ncols],
            iterations: 0,
            max_iterations: 50 * (sf.m + sf.ncols) + 1000,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.sf.ncols..(i + 1) * self.sf.ncols]
    }

    fn price(&mut self, cost: &[f64]) {
        let nc = self.sf.ncols;
        self.d.copy_from_slice(cost);
        for i in 0..self.sf.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * nc..(i + 1) * nc];
                for (dj, tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for &j in &self.basis {
            self.d[j] = 0.0;
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let nc = self.sf.ncols;
        let piv = self.t[r * nc + e];
        {
            let row = &mut self.t[r * nc..(r + 1) * nc];
            row.iter_mut().for_each(|v| *v /= piv);
            row[e] = 1.0;
        }
        self.rhs[r] /= piv;
        let pivot_row: Vec<f64> = self.t[r * nc..(r + 1) * nc].to_vec();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.sf.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + e];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * nc..(i + 1) * nc];
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            row[e] = 0.0;
            self.rhs[i] -= f * pivot_rhs;
            if self.rhs[i] < 0.0 && self.rhs[i] > -1e-11 {
                self.rhs[i] = 0.0;
            }
        }
        let f = self.d[e];
        if f != 0.0 {
            for (dj, p) in self.d.iter_mut().zip(&pivot_row) {
                *dj -= f * p;
            }
            self.d[e] = 0.0;
        }
        self.basis[r] = e;
        self.iterations += 1;
    }

    fn run(&mut self, cost: &[f64]) -> PhaseEnd {
        self.price(cost);
        let nc = self.sf.ncols;
        let mut streak = 0usize;
        let mut since_reprice = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return PhaseEnd::IterationLimit;
            }
            if since_reprice >= 100 {
                self.price(cost);
                since_reprice = 0;
            }
            let bland = streak > DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = -OPT_TOL;
            for j in 0..nc {
                if self.sf.artificial[j] {
                    continue;
                }
                let dj = self.d[j];
                if dj < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = dj;
                }
            }
            let Some(e) = enter else {
                return PhaseEnd::Optimal;
            };

            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.sf.m {
                let tie = self.t[i * nc + e];
                if tie <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs[i].max(0.0) / tie;
                let replace = match leave {
                    None => true,
                    Some(l) => {
                        let slack = 1e-12 * (1.0 + best_ratio.abs());
                        if ratio < best_ratio - slack {
                            true
                        } else if ratio <= best_ratio + slack {
                            if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                tie > self.t[l * nc + e]
                            }
                        } else {
                            false
                        }
                    }
                };
                if replace {
                    leave = Some(i);
                    best_ratio = best_ratio.min(ratio);
                }
            }
            let Some(r) = leave else {
                return PhaseEnd::Unbounded;
            };
            if best_ratio <= 1e-12 {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(r, e);
            since_reprice += 1;
        }
    }

    /// Pivots basic artificial variables out where possible; rows whose
    /// artificial cannot leave are linearly dependent and stay at zero.
    fn expel_artificials(&mut self) {
        for i in 0..self.sf.m {
            if !self.sf.artificial[self.basis[i]] {
                continue;
            }
            let row = self.row(i);
            let mut best = None;
            let mut mag = PIVOT_TOL * 100.0;
            for (j, v) in row.iter().enumerate() {
                if !self.sf.artificial[j] && v.abs() > mag {
                    mag = v.abs();
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                self.rhs[i] = 0.0;
                self.pivot(i, j);
            }
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))?;
            if pmax < 1e-13 * scale {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                if f == 0.0 {
                    continue;
                }
                a[i * n + k] = f;
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        Some(Lu { n, lu: a, perm })
    }

    /// Solves A x = b.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[i * n + k] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.lu[i * n + k] * x[k];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    /// Solves A^T y = c.
    fn solve_transpose(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        // A = P^T L U  =>  A^T = U^T L^T P
        let mut z = c.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] -= self.lu[k * n + i] * z[k];
            }
            z[i] /= self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                z[i] -= self.lu[k * n + i] * z[k];
            }
        }
        let mut y = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            y[p] = z[i];
        }
        y
    }
}

pub(super) fn solve_direct(lp: &LinearProgram) -> LpSolution {
    let n = lp.num_vars();
    let m0 = lp.num_rows();
    let Some(sf) = StandardForm::build(lp) else {
        return LpSolution::failed(LpStatus::Infeasible, n, m0, 0);
    };
    let mut tab = Tableau::new(&sf);

    if sf.artificial.iter().any(|&a| a) {
        let phase1: Vec<f64> = sf
            .artificial
            .iter()
            .map(|&a| if a { 1.0 } else { 0.0 })
            .collect();
        match tab.run(&phase1) {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded | PhaseEnd::IterationLimit => {
                return LpSolution::failed(LpStatus::NumericalFailure, n, m0, tab.iterations)
            }
        }
        let infeas: f64 = (0..sf.m)
            .filter(|&i| sf.artificial[tab.basis[i]])
            .map(|i| tab.rhs[i])
            .sum();
        let bscale = 1.0 + sf.b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if infeas > 1e-9 * bscale {
            return LpSolution::failed(LpStatus::Infeasible, n, m0, tab.iterations);
        }
        tab.expel_artificials();
    }

    match tab.run(&sf.cost) {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => {
            return LpSolution::failed(LpStatus::Unbounded, n, m0, tab.iterations)
        }
        PhaseEnd::IterationLimit => {
            return LpSolution::failed(LpStatus::NumericalFailure, n, m0, tab.iterations)
        }
    }

    // Basic solution and simplex multipliers, refactored from the original columns.
    let m = sf.m;
    let mut bmat = vec![0.0; m * m];
    for i in 0..m {
        for (k, &col) in tab.basis.iter().enumerate() {
            bmat[i * m + k] = sf.a[i * sf.ncols + col];
        }
    }
    let cb: Vec<f64> = tab.basis.iter().map(|&c| sf.cost[c]).collect();
    let (xb, y_std) = match Lu::factor(bmat, m) {
        Some(lu) => (lu.solve(&sf.b), lu.solve_transpose(&cb)),
        None => {
            // Fall back to the tableau: y_i = c_j - d_j for the initial unit column of row i.
            let mut unit = vec![0; m];
            for (i, u) in unit.iter_mut().enumerate() {
                *u = (0..sf.ncols)
                    .find(|&j| {
                        sf.a[i * sf.ncols + j] == 1.0
                            && (0..m).all(|r| r == i || sf.a[r * sf.ncols + j] == 0.0)
                    })
                    .unwrap_or(0);
            }
            tab.price(&sf.cost);
            let y = unit.iter().map(|&j| sf.cost[j] - tab.d[j]).collect();
            (tab.rhs.clone(), y)
        }
    };
    let mut xs = vec![0.0; sf.ncols];
    for (k, &col) in tab.basis.iter().enumerate() {
        xs[col] = xb[k].max(0.0);
    }

    let x: Vec<f64> = sf
        .vars
        .iter()
        .map(|v| match *v {
            VarMap::Shift { col, shift } => shift + xs[col],
            VarMap::Mirror { col, shift } => shift - xs[col],
            VarMap::Split { pos, neg } => xs[pos] - xs[neg],
        })
        .collect();
    let sense = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let duals: Vec<f64> = (0..sf.orig_rows)
        .map(|i| sense * sf.row_sign[i] * y_std[i])
        .collect();
    finish(lp, x, duals, tab.iterations)
}

fn finish(lp: &LinearProgram, x: Vec<f64>, duals: Vec<f64>, iterations: usize) -> LpSolution {
    let reduced_costs = (0..lp.num_vars())
        .map(|j| {
            lp.objective[j]
                - lp.constraints
                    .iter()
                    .zip(&duals)
                    .map(|(r, y)| r.coeffs[j] * y)
                    .sum::<f64>()
        })
        .collect();
    LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_value(&x),
        x,
        duals,
        reduced_costs,
        iterations,
    }
}

/// Tall LPs (many more rows than columns) are cheaper through their dual.
pub(super) fn prefers_dual(lp: &LinearProgram) -> bool {
    let n = lp.num_vars();
    let m = lp.num_rows();
    m > 40 && m > 2 * n && (0..n).all(|j| lp.upper[j] == f64::INFINITY)
}

/// Solves the LP dual of `lp` and maps the answer back. Returns `None` when
/// the dual route cannot decide (the caller then solves `lp` directly).
pub(super) fn solve_via_dual(lp: &LinearProgram) -> Option<LpSolution> {
    let n = lp.num_vars();
    let m = lp.num_rows();
    let sense = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    // Primal in min form over x' = x - lo (x' >= 0) or free x.
    let shift: Vec<f64> = lp
        .lower
        .iter()
        .map(|&l| if l.is_finite() { l } else { 0.0 })
        .collect();
    let mut dual_obj = Vec::with_capacity(m);
    for row in &lp.constraints {
        dual_obj.push(row.rhs - super::dot(&row.coeffs, &shift));
    }
    let mut dual = LinearProgram::new(Sense::Maximize, dual_obj);
    for (i, row) in lp.constraints.iter().enumerate() {
        match row.relation {
            Relation::Ge => {}
            Relation::Le => dual.set_bounds(i, f64::NEG_INFINITY, 0.0),
            Relation::Eq => dual.set_free(i),
        }
    }
    for j in 0..n {
        let coeffs: Vec<f64> = lp.constraints.iter().map(|r| r.coeffs[j]).collect();
        let rel = if lp.lower[j].is_finite() {
            Relation::Le
        } else {
            Relation::Eq
        };
        dual.add_constraint(coeffs, rel, sense * lp.objective[j]);
    }
    let dsol = solve_direct(&dual);
    if dsol.status != LpStatus::Optimal {
        if dsol.status == LpStatus::Unbounded {
            return Some(LpSolution::failed(
                LpStatus::Infeasible,
                n,
                m,
                dsol.iterations,
            ));
        }
        return None;
    }
    let x: Vec<f64> = (0..n).map(|j| shift[j] + dsol.duals[j]).collect();
    let duals: Vec<f64> = dsol.x.iter().map(|y| sense * y).collect();
    let sol = finish(lp, x, duals, dsol.iterations);
    if certificate_ok(lp, &sol) {
        Some(sol)
    } else {
        log::debug!("dual route failed certification; solving directly");
        None
    }
}
