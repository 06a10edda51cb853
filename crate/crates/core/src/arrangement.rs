//! Cells of hyperplane arrangements, enumerated incrementally by testing
//! which sides of each new hyperplane every existing cell reaches, and the
//! fixed-parameter solver that uses the cells of the receivers' indifference
//! hyperplanes as its only candidate signals.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{persuasive_lp_over, scheme_from_solution, SchemeSolution};
use crate::instance::PersuasionInstance;
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::profile::ActionProfile;

/// A partial cell under construction: its side bits and an interior point.
type PartialCell = (Vec<bool>, Vec<f64>);

/// A cell is reported as full-dimensional when its inscribed margin exceeds this.
pub const INTERIOR_TOL: f64 = 1e-8;
/// Relative singular-value threshold for linear independence.
pub const RANK_TOL: f64 = 1e-9;
/// Default cap on the number of arrangement cells `solve_fpt` may face.
pub const DEFAULT_CELL_CAP: u64 = 100_000;

const NORMAL_EPS: f64 = 1e-12;

/// `{x : normal . x = offset}`; side 1 of a label is `normal . x >= offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Hyperplane {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let h = Hyperplane { normal, offset };
        h.check()?;
        Ok(h)
    }

    pub fn through_origin(normal: Vec<f64>) -> Result<Self> {
        Self::new(normal, 0.0)
    }

    fn norm(&self) -> f64 {
        self.normal.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    fn check(&self) -> Result<()> {
        if self.norm().is_nan() || self.norm() <= NORMAL_EPS || !self.offset.is_finite() {
            return Err(Error::Degenerate(format!(
                "hyperplane normal {:?} is (numerically) zero",
                self.normal
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - self.offset
    }

    /// Unit-normal form `(a / |a|, b / |a|)`.
    fn unit(&self) -> (Vec<f64>, f64) {
        let r = self.norm();
        (self.normal.iter().map(|a| a / r).collect(), self.offset / r)
    }
}

/// Side of each hyperplane, `true` meaning `normal . x >= offset`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellLabel(pub Vec<bool>);

impl CellLabel {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn extended(&self, bit: bool) -> Self {
        let mut v = self.0.clone();
        v.push(bit);
        CellLabel(v)
    }

    pub fn of_point(hyperplanes: &[Hyperplane], x: &[f64]) -> Self {
        CellLabel(hyperplanes.iter().map(|h| h.eval(x) >= 0.0).collect())
    }
}

impl std::fmt::Display for CellLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

/// Additional affine conditions on a cell's points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Extra {
    /// `a . x = b`
    Equality(Vec<f64>, f64),
    /// `a . x > b`, kept at the same margin as the hyperplane sides.
    Margin(Vec<f64>, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Interior {
    Yes(Vec<f64>),
    No,
}

impl Interior {
    pub fn is_yes(&self) -> bool {
        matches!(self, Interior::Yes(_))
    }
}

fn check_dims(hyperplanes: &[Hyperplane], extras: &[Extra]) -> Result<usize> {
    let d = match (hyperplanes.first(), extras.first()) {
        (Some(h), _) => h.normal.len(),
        (None, Some(Extra::Equality(a, _) | Extra::Margin(a, _))) => a.len(),
        (None, None) => {
            return Err(Error::Invalid(
                "dimension undetermined: no hyperplanes".into(),
            ))
        }
    };
    for h in hyperplanes {
        if h.normal.len() != d {
            return Err(Error::Dimension(format!(
                "hyperplane in R^{} among R^{d}",
                h.normal.len()
            )));
        }
        h.check()?;
    }
    for e in extras {
        let (Extra::Equality(a, _) | Extra::Margin(a, _)) = e;
        if a.len() != d {
            return Err(Error::Dimension(format!(
                "extra constraint in R^{} among R^{d}",
                a.len()
            )));
        }
    }
    Ok(d)
}

/// Maximizes the margin `t <= 1` by which a point sits on the labelled side
/// of every hyperplane (in unit-normal distance), with `x` free.
pub fn cell_has_interior(
    hyperplanes: &[Hyperplane],
    label: &CellLabel,
    extras: &[Extra],
) -> Result<Interior> {
    if label.len() != hyperplanes.len() {
        return Err(Error::Dimension(format!(
            "label of length {} for {} hyperplanes",
            label.len(),
            hyperplanes.len()
        )));
    }
    let d = check_dims(hyperplanes, extras)?;
    interior_lp(hyperplanes, &label.0, extras, d)
}

fn interior_lp(
    hyperplanes: &[Hyperplane],
    bits: &[bool],
    extras: &[Extra],
    d: usize,
) -> Result<Interior> {
    let mut obj = vec![0.0; d + 1];
    obj[d] = 1.0;
    let mut lp = LinearProgram::new(Sense::Maximize, obj);
    for j in 0..d {
        lp.set_free(j);
    }
    lp.set_bounds(d, f64::NEG_INFINITY, 1.0);
    let margin_row = |a: &[f64], b: f64, lp: &mut LinearProgram| {
        let mut coeffs = a.to_vec();
        coeffs.push(-1.0);
        lp.add_constraint(coeffs, Relation::Ge, b);
    };
    for (h, &side) in hyperplanes.iter().zip(bits) {
        let (a, b) = h.unit();
        if side {
            margin_row(&a, b, &mut lp);
        } else {
            let neg: Vec<f64> = a.iter().map(|v| -v).collect();
            margin_row(&neg, -b, &mut lp);
        }
    }
    for e in extras {
        match e {
            Extra::Equality(a, b) => {
                let mut coeffs = a.clone();
                coeffs.push(0.0);
                lp.add_constraint(coeffs, Relation::Eq, *b);
            }
            Extra::Margin(a, b) => margin_row(a, *b, &mut lp),
        }
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal if sol.x[d] > INTERIOR_TOL => Ok(Interior::Yes(sol.x[..d].to_vec())),
        LpStatus::Optimal | LpStatus::Infeasible => Ok(Interior::No),
        status => Err(Error::lp(status, "cell interior LP")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub label: CellLabel,
    /// A point strictly inside the cell.
    pub witness: Vec<f64>,
}

/// `sum_{i <= d} C(m, i)`, the most cells `m` hyperplanes cut `R^d` into.
pub fn max_cells(m: u64, d: u64) -> u64 {
    let mut total = 0u64;
    let mut binom = 1u64;
    for i in 0..=d.min(m) {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul(m - i) / (i + 1);
    }
    total
}

pub fn enumerate_cells(hyperplanes: &[Hyperplane]) -> Result<Vec<Cell>> {
    enumerate_cells_with(hyperplanes, &[])
}

/// Cells of the arrangement restricted to the region described by `extras`.
///
/// Hyperplanes equal up to scaling are enumerated once; their label bits are
/// copied (positive scaling) or complemented (negative scaling) afterwards.
pub fn enumerate_cells_with(hyperplanes: &[Hyperplane], extras: &[Extra]) -> Result<Vec<Cell>> {
    let d = check_dims(hyperplanes, extras)?;
    let (unique, map) = collapse_duplicates(hyperplanes);

    let root = match interior_lp(&[], &[], extras, d)? {
        Interior::Yes(w) => w,
        Interior::No => return Ok(Vec::new()),
    };
    let mut cells = vec![(Vec::<bool>::new(), root)];
    for (i, h) in unique.iter().enumerate() {
        let planes = &unique[..=i];
        let next: Result<Vec<Vec<PartialCell>>> = cells
            .par_iter()
            .map(|(bits, witness)| {
                // The known witness settles one side unless it lies on `h`.
                let known = h.eval(witness);
                let mut out = Vec::with_capacity(2);
                for side in [true, false] {
                    let mut ext = bits.clone();
                    ext.push(side);
                    let free = if side {
                        known > INTERIOR_TOL
                    } else {
                        known < -INTERIOR_TOL
                    };
                    if free {
                        out.push((ext, witness.clone()));
                    } else if let Interior::Yes(w) = interior_lp(planes, &ext, extras, d)? {
                        out.push((ext, w));
                    }
                }
                Ok(out)
            })
            .collect();
        cells = next?.into_iter().flatten().collect();
    }
    Ok(cells
        .into_iter()
        .map(|(bits, witness)| Cell {
            label: CellLabel(map.iter().map(|&(k, same)| bits[k] == same).collect()),
            witness,
        })
        .collect())
}

/// Distinct hyperplanes and, per input, `(index into distinct, same orientation)`.
fn collapse_duplicates(hyperplanes: &[Hyperplane]) -> (Vec<Hyperplane>, Vec<(usize, bool)>) {
    let mut unique: Vec<Hyperplane> = Vec::new();
    let mut units: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut map = Vec::with_capacity(hyperplanes.len());
    let close = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64), s: f64| {
        a.0.iter()
            .zip(&b.0)
            .all(|(x, y)| (x - s * y).abs() <= 1e-12)
            && (a.1 - s * b.1).abs() <= 1e-12
    };
    for h in hyperplanes {
        let u = h.unit();
        let hit = units.iter().enumerate().find_map(|(k, v)| {
            if close(&u, v, 1.0) {
                Some((k, true))
            } else if close(&u, v, -1.0) {
                Some((k, false))
            } else {
                None
            }
        });
        match hit {
            Some(m) => map.push(m),
            None => {
                map.push((unique.len(), true));
                unique.push(h.clone());
                units.push(u);
            }
        }
    }
    (unique, map)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Nondegeneracy {
    Ok,
    /// 0-based receivers whose payoff vectors are linearly dependent.
    Violating(Vec<usize>),
}

fn is_independent(vectors: &[&[f64]]) -> bool {
    let d = vectors[0].len();
    let m = DMatrix::from_fn(vectors.len(), d, |r, c| vectors[r][c]);
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min > RANK_TOL * max
}

/// Every `d` payoff vectors must be linearly independent (all of them when
/// there are fewer than `d` receivers).
pub fn check_nondegeneracy(inst: &PersuasionInstance) -> Result<Nondegeneracy> {
    inst.check(false)?;
    let d = inst.d();
    let k = d.min(inst.n);
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let rows: Vec<&[f64]> = subset.iter().map(|&i| inst.payoff[i].as_slice()).collect();
        if !is_independent(&rows) {
            return Ok(Nondegeneracy::Violating(subset));
        }
        // next k-combination of 0..n in lexicographic order
        let Some(pos) = (0..k).rev().find(|&p| subset[p] < inst.n - k + p) else {
            return Ok(Nondegeneracy::Ok);
        };
        subset[pos] += 1;
        for p in pos + 1..k {
            subset[p] = subset[p - 1] + 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FptSolution {
    pub solution: SchemeSolution,
    /// Labels of the arrangement cells whose closure meets the simplex.
    pub candidates: Vec<ActionProfile>,
    /// Cells of the full arrangement before the simplex filter.
    pub cells: usize,
}

pub fn receiver_hyperplanes(inst: &PersuasionInstance) -> Result<Vec<Hyperplane>> {
    inst.payoff
        .iter()
        .map(|u| Hyperplane::through_origin(u.clone()))
        .collect()
}

/// Whether the closed cell of `s` meets the probability simplex.
fn meets_simplex(inst: &PersuasionInstance, s: &ActionProfile) -> Result<bool> {
    let d = inst.d();
    let mut lp = LinearProgram::new(Sense::Minimize, vec![0.0; d]);
    lp.add_constraint(vec![1.0; d], Relation::Eq, 1.0);
    for i in 0..inst.n {
        let rel = if s.contains(i) {
            Relation::Ge
        } else {
            Relation::Le
        };
        lp.add_constraint(inst.payoff[i].clone(), rel, 0.0);
    }
    match solve_lp(&lp)?.status {
        LpStatus::Optimal => Ok(true),
        LpStatus::Infeasible => Ok(false),
        status => Err(Error::lp(status, "simplex filter")),
    }
}

/// Optimal persuasive scheme using only arrangement cells as signals.
pub fn solve_fpt(inst: &PersuasionInstance, cell_cap: u64) -> Result<FptSolution> {
    if let Nondegeneracy::Violating(set) = check_nondegeneracy(inst)? {
        return Err(Error::Degenerate(format!(
            "payoff vectors of receivers {:?} are linearly dependent",
            set.iter().map(|i| i + 1).collect::<Vec<_>>()
        )));
    }
    let bound = max_cells(inst.n as u64, inst.d() as u64);
    if bound > cell_cap {
        return Err(Error::CapExceeded(format!(
            "arrangement may have {bound} cells (cap {cell_cap})"
        )));
    }
    let cells = enumerate_cells(&receiver_hyperplanes(inst)?)?;
    let mut candidates = Vec::new();
    for cell in &cells {
        let s = ActionProfile::from_members(inst.n, (0..inst.n).filter(|&i| cell.label.0[i]))?;
        if meets_simplex(inst, &s)? {
            candidates.push(s);
        }
    }
    candidates.sort();
    candidates.dedup();
    let objectives = inst.objectives()?;
    let lp = persuasive_lp_over(inst, &objectives, &candidates, 0.0);
    let sol = solve_lp(&lp)?.require_optimal("restricted persuasion LP")?;
    Ok(FptSolution {
        solution: SchemeSolution {
            scheme: scheme_from_solution(inst, &candidates, &sol.x)?,
            value: sol.objective,
            candidates: candidates.len(),
        },
        candidates,
        cells: cells.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Objective;
    use crate::setfn::SetFunctionSpec;

    fn line(a: &[f64], b: f64) -> Hyperplane {
        Hyperplane::new(a.to_vec(), b).unwrap()
    }

    fn label(bits: &[u8]) -> CellLabel {
        CellLabel(bits.iter().map(|&b| b == 1).collect())
    }

    #[test]
    fn half_line_and_contradiction() {
        let h = [line(&[1.0], 0.0)];
        let Interior::Yes(w) = cell_has_interior(&h, &label(&[1]), &[]).unwrap() else {
            panic!("half-line has interior");
        };
        assert!(w[0] > 0.0);
        let dup = [line(&[1.0], 0.0), line(&[1.0], 0.0)];
        assert_eq!(
            cell_has_interior(&dup, &label(&[1, 0]), &[]).unwrap(),
            Interior::No
        );
    }

    #[test]
    fn bounded_middle_triangle() {
        // x >= 0, y >= 0, x + y <= 1 bound a triangle; its label is [1, 1, 0]
        let h = [
            line(&[1.0, 0.0], 0.0),
            line(&[0.0, 1.0], 0.0),
            line(&[1.0, 1.0], 1.0),
        ];
        let Interior::Yes(w) = cell_has_interior(&h, &label(&[1, 1, 0]), &[]).unwrap() else {
            panic!("triangle has interior");
        };
        assert_eq!(CellLabel::of_point(&h, &w), label(&[1, 1, 0]));
    }

    #[test]
    fn counts_small_arrangements() {
        let one = enumerate_cells(&[line(&[1.0, 2.0], 0.5)]).unwrap();
        let mut labels: Vec<_> = one.iter().map(|c| c.label.clone()).collect();
        labels.sort();
        assert_eq!(labels, vec![label(&[0]), label(&[1])]);

        let three = [
            line(&[1.0, 0.0], 0.0),
            line(&[0.0, 1.0], 0.0),
            line(&[1.0, 1.0], 1.0),
        ];
        assert_eq!(enumerate_cells(&three).unwrap().len(), 7);

        let four = [
            line(&[1.0, 0.0], 0.0),
            line(&[0.0, 1.0], 0.0),
            line(&[1.0, 1.0], 1.0),
            line(&[1.0, -2.0], 0.3),
        ];
        assert_eq!(enumerate_cells(&four).unwrap().len(), 11);
        let parallel = [
            line(&[1.0, 0.0], 0.0),
            line(&[1.0, 0.0], 1.0),
            line(&[0.0, 1.0], 0.0),
            line(&[1.0, 1.0], 0.5),
        ];
        assert_eq!(enumerate_cells(&parallel).unwrap().len(), 10);
    }

    #[test]
    fn duplicates_share_bits() {
        let h = [
            line(&[1.0, 1.0], 0.0),
            line(&[-2.0, -2.0], 0.0),
            line(&[1.0, -1.0], 0.0),
        ];
        let cells = enumerate_cells(&h).unwrap();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.label.0[0] != c.label.0[1]));
        for c in &cells {
            assert!(cell_has_interior(&h, &c.label, &[]).unwrap().is_yes());
        }
    }

    #[test]
    fn zero_normal_rejected() {
        assert!(matches!(
            Hyperplane::new(vec![0.0, 0.0], 0.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn simplex_restricted_cells() {
        // on the 2-simplex, p1 - p2 = 0 splits once
        let h = [line(&[1.0, -1.0], 0.0)];
        let extras = [
            Extra::Equality(vec![1.0, 1.0], 1.0),
            Extra::Margin(vec![1.0, 0.0], 0.0),
            Extra::Margin(vec![0.0, 1.0], 0.0),
        ];
        assert_eq!(enumerate_cells_with(&h, &extras).unwrap().len(), 2);
    }

    #[test]
    fn degeneracy_detection() {
        let inst = PersuasionInstance::new(
            vec![0.5, 0.5],
            vec![vec![1.0, -1.0]; 2],
            Objective::Shared(SetFunctionSpec::cardinality(2)),
        );
        assert_eq!(
            check_nondegeneracy(&inst).unwrap(),
            Nondegeneracy::Violating(vec![0, 1])
        );
        assert!(matches!(
            solve_fpt(&inst, DEFAULT_CELL_CAP),
            Err(Error::Degenerate(_))
        ));
        let ok = PersuasionInstance::new(
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            Objective::Shared(SetFunctionSpec::cardinality(2)),
        );
        assert_eq!(check_nondegeneracy(&ok).unwrap(), Nondegeneracy::Ok);
    }

    #[test]
    fn single_state_fpt() {
        let inst = PersuasionInstance::new(
            vec![1.0],
            vec![vec![0.5], vec![-0.2], vec![0.1]],
            Objective::Shared(SetFunctionSpec::cardinality(3)),
        );
        let sol = solve_fpt(&inst, DEFAULT_CELL_CAP).unwrap();
        assert_eq!(
            sol.candidates,
            vec![ActionProfile::from_bits(&[1, 0, 1]).unwrap()]
        );
        assert!((sol.solution.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cell_bound_formula() {
        assert_eq!(max_cells(3, 2), 7);
        assert_eq!(max_cells(6, 2), 22);
        assert_eq!(max_cells(2, 5), 4);
    }
}
