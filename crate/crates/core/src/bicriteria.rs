//! Approximately optimal ε-persuasive schemes for a state-independent
//! submodular objective: classify receivers at every point of a K-uniform
//! grid on the simplex, complete the undecided ones with an α-approximate
//! subroutine, and mix grid points back into the prior with an LP.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{PersuasionInstance, PublicScheme};
use crate::lp::{solve_lp, LinearProgram, Relation, Sense};
use crate::profile::ActionProfile;
use crate::setfn::{alpha_subroutine, CompletionStrategy, SetFunction};

pub const DEFAULT_GRID_CAP: u64 = 1_000_000;
/// Receivers within this of the ±ε thresholds are left undecided.
pub const CLASSIFY_TOL: f64 = 1e-9;

/// `ceil(2 ln(2/δ) / ε^2)`.
pub fn grid_resolution(eps: f64, delta: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Invalid(format!(
            "eps = {eps} and delta = {delta} must lie in (0, 1)"
        )));
    }
    Ok((2.0 * (2.0 / delta).ln() / (eps * eps)).ceil() as u64)
}

/// `C(k + d - 1, d - 1)`, saturating.
pub fn grid_size(d: usize, k: u64) -> u64 {
    let mut size: u128 = 1;
    for i in 1..d as u128 {
        size = size * (k as u128 + i) / i;
        if size > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    size as u64
}

/// Points of the simplex over `d` states whose coordinates are multiples of `1/k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KUniformGrid {
    pub k: u64,
    pub d: usize,
    /// Integer numerators, each row summing to `k`.
    pub points: Vec<Vec<u64>>,
}

impl KUniformGrid {
    pub fn with_resolution(d: usize, k: u64, cap: u64) -> Result<Self> {
        if d == 0 || k == 0 {
            return Err(Error::Invalid("grid needs d >= 1 and K >= 1".into()));
        }
        let size = grid_size(d, k);
        if size > cap {
            return Err(Error::CapExceeded(format!(
                "K = {k} over {d} states gives {size} grid points (cap {cap})"
            )));
        }
        let mut points = Vec::with_capacity(size as usize);
        let mut current = vec![0u64; d];
        compositions(k, 0, &mut current, &mut points);
        debug_assert_eq!(points.len() as u64, size);
        Ok(KUniformGrid { k, d, points })
    }

    pub fn point(&self, j: usize) -> Vec<f64> {
        self.points[j]
            .iter()
            .map(|&c| c as f64 / self.k as f64)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn compositions(left: u64, pos: usize, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if pos + 1 == current.len() {
        current[pos] = left;
        out.push(current.clone());
        return;
    }
    for c in 0..=left {
        current[pos] = c;
        compositions(left - c, pos + 1, current, out);
    }
}

pub fn build_grid(d: usize, eps: f64, delta: f64, cap: u64) -> Result<KUniformGrid> {
    KUniformGrid::with_resolution(d, grid_resolution(eps, delta)?, cap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProfile {
    pub point: Vec<f64>,
    /// Expected payoff above ε: told to act.
    pub above: Vec<usize>,
    /// Expected payoff below -ε: told not to act.
    pub below: Vec<usize>,
    /// Within ε of indifference: decided by the completion subroutine.
    pub undecided: Vec<usize>,
    pub profile: ActionProfile,
    pub value: f64,
    pub alpha: f64,
}

pub fn classify_and_complete(
    inst: &PersuasionInstance,
    f: &SetFunction,
    point: &[f64],
    eps: f64,
) -> Result<GridProfile> {
    let (mut above, mut below, mut undecided) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..inst.n {
        let v = inst.weighted_payoff(i, point);
        if v > eps + CLASSIFY_TOL {
            above.push(i);
        } else if v < -eps - CLASSIFY_TOL {
            below.push(i);
        } else {
            undecided.push(i);
        }
    }
    let fixed = ActionProfile::from_members(inst.n, above.iter().copied())?;
    let done = alpha_subroutine(f, &fixed, &undecided)?;
    Ok(GridProfile {
        point: point.to_vec(),
        above,
        below,
        undecided,
        profile: done.profile,
        value: done.value,
        alpha: if done.strategy == CompletionStrategy::DoubleGreedy {
            0.5
        } else {
            done.alpha
        },
    })
}

/// Weights `x` on `points` maximizing `sum x value` with `sum x point = prior`.
pub fn decompose_prior(points: &[Vec<f64>], values: &[f64], prior: &[f64]) -> Result<Vec<f64>> {
    if points.len() != values.len() {
        return Err(Error::Dimension(format!(
            "{} points, {} values",
            points.len(),
            values.len()
        )));
    }
    let mut lp = LinearProgram::new(Sense::Maximize, values.to_vec());
    for (t, &l) in prior.iter().enumerate() {
        let coeffs = points.iter().map(|p| p[t]).collect();
        lp.add_constraint(coeffs, Relation::Eq, l);
    }
    lp.add_constraint(vec![1.0; points.len()], Relation::Eq, 1.0);
    let sol = solve_lp(&lp)?.require_optimal("prior decomposition LP")?;
    Ok(sol.x.iter().map(|x| x.max(0.0)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSignal {
    pub point: Vec<f64>,
    pub profile: ActionProfile,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicriteriaSolution {
    /// One signal per grid point in the support, in grid order.
    pub grid_signals: Vec<GridSignal>,
    /// `probs[theta][j] = weight_j * point_j[theta] / prior[theta]` over `grid_signals`.
    pub grid_probs: Vec<Vec<f64>>,
    pub value: f64,
    pub k: u64,
    pub grid_size: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl BicriteriaSolution {
    /// Merges grid signals that recommend the same profile. The merged signal's
    /// ε-slack is a sum of slacks each bounded by its own weight times ε,
    /// so ε-persuasiveness survives.
    pub fn to_public_scheme(&self) -> Result<PublicScheme> {
        PublicScheme::merging(
            self.grid_signals.iter().map(|g| g.profile).collect(),
            self.grid_probs.clone(),
        )
    }
}

pub fn solve_bicriteria(
    inst: &PersuasionInstance,
    eps: f64,
    delta: f64,
    grid_cap: u64,
) -> Result<BicriteriaSolution> {
    inst.check(true)?;
    let spec = inst.shared_objective().ok_or_else(|| {
        Error::Unsupported("the grid algorithm needs one objective shared by all states".into())
    })?;
    let f = SetFunction::new(spec.clone())?;
    let st = f.structure();
    let (alpha, beta) = if st.monotone {
        (1.0, 1.0)
    } else if st.submodular {
        (0.5, 2.0)
    } else {
        return Err(Error::Unsupported(format!(
            "{} objective is neither monotone nor submodular",
            spec.kind_name()
        )));
    };
    let grid = build_grid(inst.d(), eps, delta, grid_cap)?;
    let points: Vec<Vec<f64>> = (0..grid.len()).map(|j| grid.point(j)).collect();
    let profiles: Vec<GridProfile> = points
        .par_iter()
        .map(|p| classify_and_complete(inst, &f, p, eps))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = profiles.iter().map(|g| g.value).collect();
    let x = decompose_prior(&points, &values, &inst.prior)?;
    let support: Vec<usize> = (0..x.len()).filter(|&j| x[j] > 0.0).collect();
    let grid_signals: Vec<GridSignal> = support
        .iter()
        .map(|&j| GridSignal {
            point: points[j].clone(),
            profile: profiles[j].profile,
            weight: x[j],
        })
        .collect();
    let grid_probs = (0..inst.d())
        .map(|t| {
            grid_signals
                .iter()
                .map(|g| g.weight * g.point[t] / inst.prior[t])
                .collect()
        })
        .collect();
    let alpha = profiles.iter().map(|g| g.alpha).fold(alpha, f64::min);
    Ok(BicriteriaSolution {
        value: support.iter().map(|&j| x[j] * values[j]).sum(),
        grid_signals,
        grid_probs,
        k: grid.k,
        grid_size: grid.len(),
        alpha,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Objective;
    use crate::setfn::SetFunctionSpec;

    #[test]
    fn resolution_and_sizes() {
        assert_eq!(grid_resolution(0.5, 0.5).unwrap(), 12);
        assert_eq!(build_grid(2, 0.5, 0.5, DEFAULT_GRID_CAP).unwrap().len(), 13);
        assert_eq!(
            build_grid(1, 0.2, 0.2, DEFAULT_GRID_CAP).unwrap().points,
            vec![vec![grid_resolution(0.2, 0.2).unwrap()]]
        );
        let g = KUniformGrid::with_resolution(2, 2, 10).unwrap();
        assert_eq!(g.points, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        assert!(matches!(
            KUniformGrid::with_resolution(3, 100, 10),
            Err(Error::CapExceeded(_))
        ));
    }

    #[test]
    fn classification_thresholds() {
        let inst = PersuasionInstance::new(
            vec![0.5, 0.5],
            vec![vec![0.5, -1.0], vec![1.0, -1.0]],
            Objective::Shared(SetFunctionSpec::cardinality(2)),
        );
        let f = SetFunction::new(SetFunctionSpec::cardinality(2)).unwrap();
        let g = classify_and_complete(&inst, &f, &[1.0, 0.0], 0.1).unwrap();
        assert!(g.above.contains(&0));
        let g = classify_and_complete(&inst, &f, &[0.5, 0.5], 0.1).unwrap();
        assert_eq!(g.undecided, vec![1]);
        assert_eq!(g.below, vec![0]);
        assert!(g.profile.contains(1));
    }

    #[test]
    fn prior_mixture() {
        let pts = vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]];
        let x = decompose_prior(&pts, &[1.0, 1.0, 1.0], &[0.25, 0.75]).unwrap();
        for t in 0..2 {
            let m: f64 = pts.iter().zip(&x).map(|(p, w)| p[t] * w).sum();
            assert!((m - [0.25, 0.75][t]).abs() < 1e-12);
        }
        let x = decompose_prior(&[vec![1.0]], &[2.0], &[1.0]).unwrap();
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn single_state_is_uninformative() {
        let inst = PersuasionInstance::new(
            vec![1.0],
            vec![vec![0.5], vec![-0.5], vec![0.05]],
            Objective::Shared(SetFunctionSpec::cardinality(3)),
        );
        let sol = solve_bicriteria(&inst, 0.1, 0.1, DEFAULT_GRID_CAP).unwrap();
        let scheme = sol.to_public_scheme().unwrap();
        assert_eq!(
            scheme.signals,
            vec![ActionProfile::from_bits(&[1, 0, 1]).unwrap()]
        );
        assert!((sol.value - 2.0).abs() < 1e-12);
    }
}
