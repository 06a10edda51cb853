//! cce-persuasive schemes at scale through the dual LP, whose exponentially
//! many rows are separated by maximizing `f_theta(S) - w(S)`; plus the
//! two-state reduction instances used to cross-check the converse
//! direction against a brute-force LP.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{cce_lp_over, scheme_from_solution, SchemeSolution, MAX_EXACT_N};
use crate::instance::{Objective, PersuasionInstance, PublicScheme, PERSUASION_TOL};
use crate::lp::{
    default_max_rounds, solve_lp, solve_with_cuts, Cut, CutStatus, LinearProgram, Relation, Sense,
    SeparationOracle, FEAS_TOL, GAP_TOL,
};
use crate::profile::ActionProfile;
use crate::setfn::{maximize_minus_linear, SetFunctionSpec};

/// Dual rows `x_theta - lambda_theta sum_{i in S} u_i(theta) y_i >= lambda_theta f_theta(S)`
/// over variables `[x_0..x_{d-1}, y_0..y_{n-1}]`.
struct CceSeparation<'a> {
    inst: &'a PersuasionInstance,
    specs: Vec<SetFunctionSpec>,
}

impl CceSeparation<'_> {
    fn row(&self, t: usize, s: &ActionProfile, value: f64) -> (Vec<f64>, f64) {
        let (d, n) = (self.inst.d(), self.inst.n);
        let lam = self.inst.prior[t];
        let mut coeffs = vec![0.0; d + n];
        coeffs[t] = 1.0;
        for i in s.members() {
            coeffs[d + i] = -lam * self.inst.payoff[i][t];
        }
        (coeffs, lam * value)
    }
}

impl SeparationOracle for CceSeparation<'_> {
    type Tag = (usize, ActionProfile);

    fn separate(&self, x: &[f64]) -> Result<Vec<Cut<Self::Tag>>> {
        let (d, n) = (self.inst.d(), self.inst.n);
        let y = &x[d..d + n];
        let found: Vec<Option<Cut<Self::Tag>>> = (0..d)
            .into_par_iter()
            .map(|t| {
                let w: Vec<f64> = (0..n).map(|i| -y[i] * self.inst.payoff[i][t]).collect();
                let (s, best) = maximize_minus_linear(&self.specs[t], &w)?;
                let need = self.inst.prior[t] * best;
                if x[t] >= need - FEAS_TOL {
                    return Ok(None);
                }
                let (coeffs, rhs) = self.row(t, &s, self.specs[t].eval_mask(s.mask()));
                Ok(Some(Cut {
                    coeffs,
                    relation: Relation::Ge,
                    rhs,
                    violation: need - x[t],
                    tag: (t, s),
                }))
            })
            .collect::<Result<_>>()?;
        Ok(found.into_iter().flatten().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CceSolution {
    pub solution: SchemeSolution,
    pub dual_value: f64,
    pub gap: f64,
    pub rounds: usize,
    /// `(state, profile)` of each generated dual row, in generation order.
    pub cuts: Vec<(usize, ActionProfile)>,
    /// Number of cuts generated in each round.
    pub round_cuts: Vec<usize>,
    /// Optimum of the dual relaxation after each round.
    pub objective_history: Vec<f64>,
}

fn objective_specs(inst: &PersuasionInstance) -> Vec<SetFunctionSpec> {
    match &inst.objective {
        Objective::Shared(f) => vec![f.clone(); inst.d()],
        Objective::PerState(fs) => fs.clone(),
    }
}

/// Dual rows present before the first round, in every state. The prior-optimal
/// profile alone is cce-feasible, which keeps every relaxation bounded.
pub fn seed_profiles(inst: &PersuasionInstance) -> Result<Vec<ActionProfile>> {
    Ok(vec![
        ActionProfile::empty(inst.n)?,
        ActionProfile::full(inst.n)?,
        inst.prior_profile(),
    ])
}

/// Optimum of the cce LP restricted to the given `(state, profile)` columns.
pub fn restricted_cce_value(
    inst: &PersuasionInstance,
    columns: &[(usize, ActionProfile)],
) -> Result<f64> {
    let objectives = inst.objectives()?;
    let obj = columns
        .iter()
        .map(|(t, s)| inst.prior[*t] * objectives[*t].eval_mask(s.mask()))
        .collect();
    let mut lp = LinearProgram::new(Sense::Maximize, obj);
    for i in 0..inst.n {
        let coeffs = columns
            .iter()
            .map(|(t, s)| {
                if s.contains(i) {
                    inst.prior[*t] * inst.payoff[i][*t]
                } else {
                    0.0
                }
            })
            .collect();
        lp.add_constraint(coeffs, Relation::Ge, inst.prior_opt(i));
    }
    for t in 0..inst.d() {
        lp.add_constraint(
            columns
                .iter()
                .map(|(u, _)| f64::from(u8::from(*u == t)))
                .collect(),
            Relation::Eq,
            1.0,
        );
    }
    Ok(solve_lp(&lp)?
        .require_optimal("restricted cce LP")?
        .objective)
}

/// Optimal cce-persuasive scheme by cut generation on the dual.
pub fn solve_cce_cutting(
    inst: &PersuasionInstance,
    max_rounds: Option<usize>,
) -> Result<CceSolution> {
    inst.check(false)?;
    let (d, n) = (inst.d(), inst.n);
    let sep = CceSeparation {
        inst,
        specs: objective_specs(inst),
    };
    let mut obj = vec![1.0; d + n];
    for i in 0..n {
        obj[d + i] = -inst.prior_opt(i);
    }
    let mut dual = LinearProgram::new(Sense::Minimize, obj);
    for t in 0..d {
        dual.set_free(t);
    }
    let seeds = seed_profiles(inst)?;
    for t in 0..d {
        for s in &seeds {
            let (coeffs, rhs) = sep.row(t, s, sep.specs[t].eval_mask(s.mask()));
            dual.add_constraint(coeffs, Relation::Ge, rhs);
        }
    }
    let rounds_cap = max_rounds.unwrap_or_else(|| default_max_rounds(d + n));
    let out = solve_with_cuts(&dual, &sep, rounds_cap)?;
    match out.status {
        CutStatus::Converged => {}
        CutStatus::RoundLimit => return Err(Error::RoundLimit { rounds: out.rounds }),
        CutStatus::Lp(status) => return Err(Error::lp(status, "cce dual relaxation")),
    }
    log::debug!(
        "cce dual converged after {} rounds, {} cuts",
        out.rounds,
        out.cuts.len()
    );

    let mut signals = seeds;
    signals.extend(out.cuts.iter().map(|c| c.tag.1));
    signals.sort();
    signals.dedup();
    let objectives = inst.objectives()?;
    let primal = cce_lp_over(inst, &objectives, &signals);
    let sol = solve_lp(&primal)?.require_optimal("cce primal recovery")?;
    let dual_value = out.solution.objective;
    let gap = (dual_value - sol.objective).abs();
    if gap > GAP_TOL * (1.0 + dual_value.abs()) {
        return Err(Error::lp(
            crate::lp::LpStatus::NumericalFailure,
            format!(
                "cce primal {} and dual {dual_value} disagree",
                sol.objective
            ),
        ));
    }
    Ok(CceSolution {
        solution: SchemeSolution {
            scheme: scheme_from_solution(inst, &signals, &sol.x)?,
            value: sol.objective,
            candidates: signals.len(),
        },
        dual_value,
        gap,
        rounds: out.rounds,
        cuts: out.cuts.into_iter().map(|c| c.tag).collect(),
        round_cuts: out.round_sizes,
        objective_history: out.objective_history,
    })
}

/// Marginal targets for a two-state reduction instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionSpec {
    pub f: SetFunctionSpec,
    pub beta: Vec<f64>,
    /// 0-based receivers with an upper marginal bound; the rest have a lower bound.
    pub s_plus: Vec<usize>,
    pub s_minus: Vec<usize>,
}

impl ReductionSpec {
    pub fn n(&self) -> usize {
        self.f.n()
    }

    pub fn plus_profile(&self) -> Result<ActionProfile> {
        ActionProfile::from_members(self.n(), self.s_plus.iter().copied())
    }

    /// Checks the partition and returns `beta` clamped to `[0, 1]`.
    pub fn checked_beta(&self) -> Result<Vec<f64>> {
        let n = self.n();
        self.f.validate()?;
        if self.beta.len() != n {
            return Err(Error::Dimension(format!(
                "{} beta values for {n} receivers",
                self.beta.len()
            )));
        }
        let plus = self.plus_profile()?;
        let minus = ActionProfile::from_members(n, self.s_minus.iter().copied())?;
        if plus.len() != self.s_plus.len() || minus.len() != self.s_minus.len() {
            return Err(Error::Invalid(
                "s_plus or s_minus lists a receiver twice".into(),
            ));
        }
        if plus.mask() & minus.mask() != 0 || plus.len() + minus.len() != n {
            return Err(Error::Invalid(
                "s_plus and s_minus must partition the receivers".into(),
            ));
        }
        Ok(self
            .beta
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                if !(0.0..=1.0).contains(&b) {
                    log::warn!("beta[{i}] = {b} clamped into [0, 1]");
                }
                b.clamp(0.0, 1.0)
            })
            .collect())
    }
}

pub fn build_reduction_instance(spec: &ReductionSpec) -> Result<PersuasionInstance> {
    let beta = spec.checked_beta()?;
    let plus = spec.plus_profile()?;
    let n = spec.n();
    let payoff = (0..n)
        .map(|i| {
            if plus.contains(i) {
                vec![beta[i], -1.0]
            } else {
                vec![-(1.0 - beta[i]), 1.0]
            }
        })
        .collect();
    Ok(PersuasionInstance {
        n,
        states: vec!["theta0".into(), "theta1".into()],
        prior: vec![0.5, 0.5],
        payoff,
        objective: Objective::PerState(vec![SetFunctionSpec::zero(n), spec.f.clone()]),
    })
}

fn wm_primal_lp(spec: &ReductionSpec, beta: &[f64]) -> Result<LinearProgram> {
    let n = spec.n();
    if n > MAX_EXACT_N {
        return Err(Error::CapExceeded(format!(
            "WM primal over 2^{n} sets (cap n = {MAX_EXACT_N})"
        )));
    }
    let plus = spec.plus_profile()?;
    let mut lp = LinearProgram::new(Sense::Maximize, spec.f.table()?);
    let sets = 1u64 << n;
    lp.add_constraint(vec![1.0; sets as usize], Relation::Eq, 1.0);
    for (i, &b) in beta.iter().enumerate() {
        let coeffs = (0..sets).map(|t| (t >> i & 1) as f64).collect();
        let rel = if plus.contains(i) {
            Relation::Le
        } else {
            Relation::Ge
        };
        lp.add_constraint(coeffs, rel, b);
    }
    Ok(lp)
}

/// Best distribution over sets whose marginals respect `beta`: at most on
/// `s_plus`, at least on `s_minus`. Returns `p[mask]` and its value.
pub fn solve_wm_primal_bruteforce(spec: &ReductionSpec) -> Result<(Vec<f64>, f64)> {
    let beta = spec.checked_beta()?;
    let lp = wm_primal_lp(spec, &beta)?;
    let sol = solve_lp(&lp)?.require_optimal("WM primal LP")?;
    Ok((sol.x, sol.objective))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WmDualValue {
    Unbounded,
    Value(f64),
}

/// Closed-form optimum of `min beta.w + alpha v` s.t. `v + w(S) >= f(S)`,
/// `w >= 0` on `s_plus`, `w <= 0` elsewhere, valid for `alpha <= 0`.
pub fn wm_dual_alpha_nonpositive(
    beta: &[f64],
    alpha: f64,
    s_plus: &ActionProfile,
) -> Result<WmDualValue> {
    if alpha > 0.0 || alpha.is_nan() {
        return Err(Error::Invalid(format!("alpha = {alpha} is positive")));
    }
    if beta.len() != s_plus.n() {
        return Err(Error::Dimension(format!(
            "{} beta values for {} receivers",
            beta.len(),
            s_plus.n()
        )));
    }
    if alpha < 0.0 {
        return Ok(WmDualValue::Unbounded);
    }
    let escapes = beta
        .iter()
        .enumerate()
        .any(|(i, &b)| if s_plus.contains(i) { b < 0.0 } else { b > 0.0 });
    Ok(if escapes {
        WmDualValue::Unbounded
    } else {
        WmDualValue::Value(0.0)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    /// cce optimum with the first state always recommending the `s_plus` profile.
    pub cce_value: f64,
    pub unpinned_cce_value: f64,
    pub wm_primal_value: f64,
    /// Worst breach of the WM primal constraints by the second state's row.
    pub row_violation: f64,
    pub scheme: PublicScheme,
    pub passed: bool,
}

pub fn crossvalidate_equivalence(spec: &ReductionSpec) -> Result<CrossValidation> {
    let n = spec.n();
    if n > 10 {
        return Err(Error::CapExceeded(format!(
            "cross-validation over {n} receivers (cap 10)"
        )));
    }
    let beta = spec.checked_beta()?;
    let inst = build_reduction_instance(spec)?;
    let objectives = inst.objectives()?;
    let signals: Vec<ActionProfile> = (0..1u64 << n).map(|m| ActionProfile::raw(n, m)).collect();
    let kk = signals.len();
    let base = cce_lp_over(&inst, &objectives, &signals);
    let unpinned = solve_lp(&base)?.require_optimal("unpinned cce LP")?;

    let plus = spec.plus_profile()?;
    let mut pinned = base;
    for (k, s) in signals.iter().enumerate() {
        let v = if *s == plus { 1.0 } else { 0.0 };
        pinned.set_bounds(k, v, v);
    }
    let sol = solve_lp(&pinned)?.require_optimal("pinned cce LP")?;
    let (_, wm) = solve_wm_primal_bruteforce(spec)?;

    let row = &sol.x[kk..2 * kk];
    let wm_lp = wm_primal_lp(spec, &beta)?;
    let row_violation = wm_lp.primal_residual(row);
    let scheme = scheme_from_solution(&inst, &signals, &sol.x)?;
    let passed = (sol.objective - 0.5 * wm).abs() <= 1e-6
        && (unpinned.objective - sol.objective).abs() <= 1e-6
        && row_violation <= PERSUASION_TOL;
    Ok(CrossValidation {
        cce_value: sol.objective,
        unpinned_cce_value: unpinned.objective,
        wm_primal_value: wm,
        row_violation,
        scheme,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::solve_cce_exact;
    use crate::instance::{verify_scheme, Mode};

    fn half_spec() -> ReductionSpec {
        ReductionSpec {
            f: SetFunctionSpec::cardinality(1),
            beta: vec![0.5],
            s_plus: vec![0],
            s_minus: vec![],
        }
    }

    #[test]
    fn reduction_payoffs() {
        let inst = build_reduction_instance(&half_spec()).unwrap();
        assert_eq!(inst.payoff, vec![vec![0.5, -1.0]]);
        let minus = ReductionSpec {
            beta: vec![1.0],
            s_plus: vec![],
            s_minus: vec![0],
            ..half_spec()
        };
        assert_eq!(
            build_reduction_instance(&minus).unwrap().payoff,
            vec![vec![0.0, 1.0]]
        );
    }

    #[test]
    fn half_spec_values() {
        let (p, v) = solve_wm_primal_bruteforce(&half_spec()).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
        let cv = crossvalidate_equivalence(&half_spec()).unwrap();
        assert!(cv.passed, "{cv:?}");
        assert!((cv.cce_value - 0.25).abs() < 1e-9);
        let exact = solve_cce_exact(&build_reduction_instance(&half_spec()).unwrap()).unwrap();
        assert!((exact.value - 0.25).abs() < 1e-9);
    }

    #[test]
    fn alpha_cases() {
        let plus = ActionProfile::from_bits(&[1]).unwrap();
        assert_eq!(
            wm_dual_alpha_nonpositive(&[0.3], -1.0, &plus).unwrap(),
            WmDualValue::Unbounded
        );
        assert_eq!(
            wm_dual_alpha_nonpositive(&[-1.0], 0.0, &plus).unwrap(),
            WmDualValue::Unbounded
        );
        assert_eq!(
            wm_dual_alpha_nonpositive(&[0.3], 0.0, &plus).unwrap(),
            WmDualValue::Value(0.0)
        );
        let minus = ActionProfile::from_bits(&[0]).unwrap();
        assert_eq!(
            wm_dual_alpha_nonpositive(&[0.3], 0.0, &minus).unwrap(),
            WmDualValue::Unbounded
        );
        assert!(wm_dual_alpha_nonpositive(&[0.3], 0.5, &plus).is_err());
    }

    #[test]
    fn bad_partition_rejected() {
        let spec = ReductionSpec {
            s_minus: vec![0],
            ..half_spec()
        };
        assert!(build_reduction_instance(&spec).is_err());
    }

    #[test]
    fn cutting_matches_exact_on_small_instance() {
        let inst = PersuasionInstance::new(
            vec![0.3, 0.7],
            vec![vec![1.0, -0.5], vec![-0.4, 0.6]],
            Objective::PerState(vec![
                SetFunctionSpec::explicit(vec![0.0, 1.0, 0.5, 2.0]),
                SetFunctionSpec::explicit(vec![0.2, 0.0, 1.0, 1.5]),
            ]),
        );
        let cut = solve_cce_cutting(&inst, None).unwrap();
        let exact = solve_cce_exact(&inst).unwrap();
        assert!((cut.solution.value - exact.value).abs() < 1e-6);
        assert!(
            verify_scheme(&inst, &cut.solution.scheme, Mode::Cce)
                .unwrap()
                .passed
        );
        assert!(cut
            .objective_history
            .windows(2)
            .all(|w| w[0] <= w[1] + 1e-9));
    }

    #[test]
    fn zero_objective_recommends_prior_best() {
        let inst = PersuasionInstance::new(
            vec![0.5, 0.5],
            vec![vec![1.0, -0.2], vec![-1.0, 0.3]],
            Objective::Shared(SetFunctionSpec::zero(2)),
        );
        let cut = solve_cce_cutting(&inst, None).unwrap();
        assert!(cut.solution.value.abs() < 1e-12);
        assert!(
            verify_scheme(&inst, &cut.solution.scheme, Mode::Cce)
                .unwrap()
                .passed
        );
    }
}
