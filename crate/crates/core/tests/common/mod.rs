//! Test oracles that share no code with the solvers under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use persuade_core::lp::{LinearProgram, Relation, Sense};

/// Optimum of a bounded LP by enumerating every basic solution.
/// Returns `None` when no vertex is feasible.
pub fn vertex_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // Each candidate tight constraint as (row, rhs); equalities are always tight.
    let mut eqs: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut ineqs: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &lp.constraints {
        match c.relation {
            Relation::Eq => eqs.push((c.coeffs.clone(), c.rhs)),
            _ => ineqs.push((c.coeffs.clone(), c.rhs)),
        }
    }
    for j in 0..n {
        for b in [lp.lower[j], lp.upper[j]] {
            if b.is_finite() {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                ineqs.push((e, b));
            }
        }
    }
    let feasible = |x: &[f64]| {
        let tol = 1e-7;
        lp.constraints.iter().all(|c| {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            c.relation.violation(lhs, c.rhs) <= tol * (1.0 + c.rhs.abs())
        }) && (0..n).all(|j| x[j] >= lp.lower[j] - tol && x[j] <= lp.upper[j] + tol)
    };
    let need = n.checked_sub(eqs.len())?;
    let mut best: Option<f64> = None;
    for_each_subset(ineqs.len(), need, &mut |chosen| {
        let rows: Vec<&(Vec<f64>, f64)> = eqs
            .iter()
            .chain(chosen.iter().map(|&k| &ineqs[k]))
            .collect();
        let a = DMatrix::from_fn(n, n, |r, c| rows[r].0[c]);
        let b = DVector::from_fn(n, |r, _| rows[r].1);
        let Some(x) = a.lu().solve(&b) else { return };
        let x: Vec<f64> = x.iter().copied().collect();
        if x.iter().any(|v| !v.is_finite()) || !feasible(&x) {
            return;
        }
        let v: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        best = Some(match (best, lp.sense) {
            (None, _) => v,
            (Some(b), Sense::Maximize) => b.max(v),
            (Some(b), Sense::Minimize) => b.min(v),
        });
    });
    best
}

fn for_each_subset(m: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..m {
            if m - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, m, k, cur, f);
            cur.pop();
        }
    }
    rec(0, m, k, &mut Vec::new(), f);
}

/// Submodularity by the lattice definition over all pairs of sets.
pub fn is_submodular(table: &[f64]) -> bool {
    let scale = 1.0 + table.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (0..table.len()).all(|a| {
        (0..table.len()).all(|b| table[a] + table[b] >= table[a | b] + table[a & b] - 1e-9 * scale)
    })
}

pub fn is_monotone(table: &[f64]) -> bool {
    (0..table.len()).all(|a| {
        (0..table.len())
            .filter(|&b| a & b == a)
            .all(|b| table[b] >= table[a] - 1e-12)
    })
}

pub fn brute_max(table: &[f64]) -> f64 {
    table.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
