//! Worst-case ε-noise around a profile: the least expected value of `f` over
//! distributions whose membership marginals stay within ε of the profile's
//! indicator, and checks of the stability bounds that hold for each class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, Relation, Sense};
use crate::profile::ActionProfile;
use crate::setfn::{lovasz_chain_value, SetFunction, SetFunctionSpec};

pub const MAX_NOISE_N: usize = 12;
pub const BOUND_TOL: f64 = 1e-6;
/// ε values every stability sweep cycles through before drawing uniformly.
pub const FIXED_EPS: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.45];

/// The noise LP over `p(T)`, `T` indexed by mask.
pub fn noise_lp(f: &SetFunctionSpec, s: &ActionProfile, eps: f64) -> Result<LinearProgram> {
    let n = f.n();
    if s.n() != n {
        return Err(Error::Dimension(format!(
            "profile over {} receivers, function over {n}",
            s.n()
        )));
    }
    if n > MAX_NOISE_N {
        return Err(Error::CapExceeded(format!(
            "noise LP over 2^{n} sets (cap n = {MAX_NOISE_N})"
        )));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Invalid(format!("eps = {eps} outside [0, 1)")));
    }
    let table = f.table()?;
    let mut lp = LinearProgram::new(Sense::Minimize, table);
    let sets = 1u64 << n;
    for i in 0..n {
        let coeffs = (0..sets).map(|t| (t >> i & 1) as f64).collect();
        if s.contains(i) {
            lp.add_constraint(coeffs, Relation::Ge, 1.0 - eps);
        } else {
            lp.add_constraint(coeffs, Relation::Le, eps);
        }
    }
    lp.add_constraint(vec![1.0; sets as usize], Relation::Eq, 1.0);
    Ok(lp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseResult {
    pub value: f64,
    /// `witness[mask]`.
    pub witness: Vec<f64>,
    pub marginals: Vec<f64>,
}

pub fn worst_noise_value(f: &SetFunctionSpec, s: &ActionProfile, eps: f64) -> Result<NoiseResult> {
    let lp = noise_lp(f, s, eps)?;
    let sol = solve_lp(&lp)?.require_optimal("noise LP")?;
    let witness: Vec<f64> = sol.x.iter().map(|p| p.max(0.0)).collect();
    let marginals = (0..f.n())
        .map(|i| {
            witness
                .iter()
                .enumerate()
                .filter(|(t, _)| t >> i & 1 == 1)
                .map(|(_, p)| p)
                .sum::<f64>()
                .min(1.0)
        })
        .collect();
    Ok(NoiseResult {
        value: sol.objective,
        witness,
        marginals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityClass {
    /// `(1 - ε) f(S)`
    MonotoneSubmodular,
    /// `(1 - 2ε) f(S)`
    Submodular,
    /// `f(S) - n ε max f`
    General,
}

impl StabilityClass {
    pub fn of(f: &SetFunction) -> Self {
        let st = f.structure();
        match (st.monotone, st.submodular) {
            (true, true) => StabilityClass::MonotoneSubmodular,
            (_, true) => StabilityClass::Submodular,
            _ => StabilityClass::General,
        }
    }

    pub fn bound(self, fs: f64, eps: f64, n: usize, fmax: f64) -> f64 {
        match self {
            StabilityClass::MonotoneSubmodular => (1.0 - eps) * fs,
            StabilityClass::Submodular => (1.0 - 2.0 * eps) * fs,
            StabilityClass::General => fs - n as f64 * eps * fmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub set: ActionProfile,
    pub eps: f64,
    pub lp_min: f64,
    pub bound: f64,
    /// `lp_min / f(S)`; `None` when `f(S) = 0`.
    pub ratio: Option<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub class: StabilityClass,
    pub rows: Vec<StabilityRow>,
    pub min_ratio: Option<f64>,
    /// Index into `rows` of the smallest ratio.
    pub tightest: Option<usize>,
    pub all_hold: bool,
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws `(S, ε)` pairs and checks the stability bound for `f`'s class.
/// Trial `k` depends only on `(seed, k)`.
pub fn verify_stability_bounds(
    f: &SetFunction,
    trials: usize,
    seed: u64,
) -> Result<StabilityReport> {
    let n = f.n();
    let class = StabilityClass::of(f);
    let table = f.spec().table()?;
    let fmax = table.iter().fold(0.0f64, |a, v| a.max(*v));
    let rows: Vec<StabilityRow> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k as u64);
            let eps = if k < FIXED_EPS.len() * 4 {
                FIXED_EPS[k % FIXED_EPS.len()]
            } else {
                rng.gen_range(0.0..0.5)
            };
            let mask = rng.gen::<u64>() & crate::profile::full_mask(n);
            let set = ActionProfile::raw(n, mask);
            let lp_min = worst_noise_value(f.spec(), &set, eps)?.value;
            let fs = f.eval_mask(mask);
            let bound = class.bound(fs, eps, n, fmax);
            Ok(StabilityRow {
                set,
                eps,
                lp_min,
                bound,
                ratio: (fs > 0.0).then(|| lp_min / fs),
                holds: lp_min >= bound - BOUND_TOL,
            })
        })
        .collect::<Result<_>>()?;
    let tightest = rows
        .iter()
        .enumerate()
        .filter_map(|(k, r)| r.ratio.map(|q| (k, q)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k);
    Ok(StabilityReport {
        class,
        min_ratio: tightest.and_then(|k| rows[k].ratio),
        tightest,
        all_hold: rows.iter().all(|r| r.holds),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub lp_value: f64,
    pub chain_value: f64,
    pub marginals: Vec<f64>,
    pub passed: bool,
}

/// The chain distribution on the LP witness's marginals attains the LP minimum.
pub fn chain_optimality_check(f: &SetFunction, s: &ActionProfile, eps: f64) -> Result<ChainCheck> {
    if !f.structure().submodular {
        return Err(Error::Invalid(
            "chain optimality holds for submodular functions".into(),
        ));
    }
    let noise = worst_noise_value(f.spec(), s, eps)?;
    let (_, chain_value) = lovasz_chain_value(f.spec(), &noise.marginals)?;
    Ok(ChainCheck {
        lp_value: noise.value,
        chain_value,
        passed: (chain_value - noise.value).abs() <= BOUND_TOL,
        marginals: noise.marginals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indicator(n: usize) -> SetFunctionSpec {
        let mut v = vec![0.0; 1 << n];
        v[(1 << n) - 1] = 1.0;
        SetFunctionSpec::explicit(v)
    }

    #[test]
    fn no_noise_is_point_mass() {
        let f = SetFunctionSpec::additive(vec![1.0, 2.0, 0.5]);
        let s = ActionProfile::from_bits(&[1, 0, 1]).unwrap();
        let r = worst_noise_value(&f, &s, 0.0).unwrap();
        assert!((r.value - 1.5).abs() < 1e-12);
        assert!((r.witness[s.mask() as usize] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_is_tight() {
        let f = SetFunctionSpec::cardinality(4);
        let r = worst_noise_value(&f, &ActionProfile::full(4).unwrap(), 0.25).unwrap();
        assert!((r.value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn supermodular_indicator_saturates() {
        let f = indicator(3);
        let r = worst_noise_value(&f, &ActionProfile::full(3).unwrap(), 1.0 / 6.0).unwrap();
        assert!((r.value - 0.5).abs() < 1e-9);
        let sf = SetFunction::new(f).unwrap();
        assert_eq!(StabilityClass::of(&sf), StabilityClass::General);
    }

    #[test]
    fn chain_matches_on_cut() {
        let f = SetFunction::new(SetFunctionSpec::cut(
            3,
            vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)],
        ))
        .unwrap();
        for eps in [0.0, 0.1, 0.3] {
            let c = chain_optimality_check(&f, &ActionProfile::from_bits(&[1, 0, 0]).unwrap(), eps)
                .unwrap();
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn sweep_is_seed_stable() {
        let f = SetFunction::new(SetFunctionSpec::coverage(
            vec![1.0, 2.0, 1.0],
            vec![vec![0], vec![1, 2], vec![0, 2]],
        ))
        .unwrap();
        let a = verify_stability_bounds(&f, 30, 7).unwrap();
        let b = verify_stability_bounds(&f, 30, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.all_hold);
        assert_eq!(a.class, StabilityClass::MonotoneSubmodular);
    }
}
