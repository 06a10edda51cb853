//! Exact optimal public schemes over the full set of `2^n` action-profile
//! signals. Exponential in `n`; these solvers are the reference answers the
//! faster algorithms are checked against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Mode, PersuasionInstance, PublicScheme};
use crate::lp::{solve_lp, LinearProgram, Relation, Sense};
use crate::profile::ActionProfile;
use crate::setfn::SetFunction;

pub const MAX_EXACT_N: usize = 12;
/// Signals with less total probability are removed from returned schemes.
pub const PRUNE_MASS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSolution {
    pub scheme: PublicScheme,
    pub value: f64,
    /// Signals the LP was built over.
    pub candidates: usize,
}

/// Persuasion LP restricted to `signals`; variable `t * signals.len() + k`
/// is `pi(theta_t, signals[k])`. `Mode::Cce` is not handled here.
pub(crate) fn persuasive_lp_over(
    inst: &PersuasionInstance,
    objectives: &[SetFunction],
    signals: &[ActionProfile],
    eps: f64,
) -> LinearProgram {
    let (d, kk) = (inst.d(), signals.len());
    let mut obj = vec![0.0; d * kk];
    for t in 0..d {
        for (k, s) in signals.iter().enumerate() {
            obj[t * kk + k] = inst.prior[t] * objectives[t].eval_mask(s.mask());
        }
    }
    let mut lp = LinearProgram::new(Sense::Maximize, obj);
    for (k, s) in signals.iter().enumerate() {
        let mut seen: Vec<(bool, &[f64])> = Vec::new();
        for i in 0..inst.n {
            let row = inst.payoff[i].as_slice();
            let on = s.contains(i);
            if row.iter().all(|u| *u == 0.0) || seen.contains(&(on, row)) {
                continue;
            }
            seen.push((on, row));
            let mut coeffs = vec![0.0; d * kk];
            for t in 0..d {
                coeffs[t * kk + k] = inst.prior[t] * row[t];
            }
            if on {
                lp.add_constraint(coeffs, Relation::Ge, -eps);
            } else {
                lp.add_constraint(coeffs, Relation::Le, eps);
            }
        }
    }
    add_normalization(&mut lp, d, kk);
    lp
}

fn add_normalization(lp: &mut LinearProgram, d: usize, kk: usize) {
    for t in 0..d {
        let mut coeffs = vec![0.0; d * kk];
        coeffs[t * kk..(t + 1) * kk]
            .iter_mut()
            .for_each(|c| *c = 1.0);
        lp.add_constraint(coeffs, Relation::Eq, 1.0);
    }
}

/// Reads a scheme off an LP solution laid out as in [`persuasive_lp_over`].
pub(crate) fn scheme_from_solution(
    inst: &PersuasionInstance,
    signals: &[ActionProfile],
    x: &[f64],
) -> Result<PublicScheme> {
    let kk = signals.len();
    let probs = (0..inst.d())
        .map(|t| x[t * kk..(t + 1) * kk].to_vec())
        .collect();
    PublicScheme::new(signals.to_vec(), probs)?.pruned(inst, PRUNE_MASS)
}

/// Whether some posterior makes `s` an exact best-response profile, i.e. the
/// cone of unnormalized posteriors obeying `s` is nontrivial.
fn admits_posterior(inst: &PersuasionInstance, s: &ActionProfile) -> Result<bool> {
    let d = inst.d();
    let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0; d]);
    lp.add_constraint(vec![1.0; d], Relation::Le, 1.0);
    for i in 0..inst.n {
        let rel = if s.contains(i) {
            Relation::Ge
        } else {
            Relation::Le
        };
        lp.add_constraint(inst.payoff[i].clone(), rel, 0.0);
    }
    let sol = solve_lp(&lp)?.require_optimal("signal admissibility")?;
    Ok(sol.objective > 0.5)
}

fn all_profiles(n: usize) -> Vec<ActionProfile> {
    (0..1u64 << n).map(|m| ActionProfile::raw(n, m)).collect()
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_EXACT_N {
        return Err(Error::CapExceeded(format!(
            "exact solvers enumerate 2^n signals; n = {n} exceeds {MAX_EXACT_N}"
        )));
    }
    Ok(())
}

/// Optimal persuasive (`Mode::Exact`) or ε-persuasive (`Mode::Eps`) scheme.
pub fn solve_persuasive_exact(inst: &PersuasionInstance, mode: Mode) -> Result<SchemeSolution> {
    let eps = match mode {
        Mode::Exact => 0.0,
        Mode::Eps(e) if e.is_finite() && e >= 0.0 => e,
        Mode::Eps(e) => return Err(Error::Invalid(format!("eps = {e} must be nonnegative"))),
        Mode::Cce => return solve_cce_exact(inst),
    };
    inst.check(matches!(mode, Mode::Eps(_)))?;
    check_size(inst.n)?;
    let objectives = inst.objectives()?;
    let mut signals = all_profiles(inst.n);
    if eps == 0.0 {
        // Signals without an obeying posterior carry zero mass in every feasible scheme.
        let mut kept = Vec::with_capacity(signals.len());
        for s in signals {
            if admits_posterior(inst, &s)? {
                kept.push(s);
            }
        }
        signals = kept;
    }
    let lp = persuasive_lp_over(inst, &objectives, &signals, eps);
    let sol = solve_lp(&lp)?.require_optimal("exact persuasion LP")?;
    Ok(SchemeSolution {
        scheme: scheme_from_solution(inst, &signals, &sol.x)?,
        value: sol.objective,
        candidates: signals.len(),
    })
}

/// cce LP over `signals`: per-receiver obedience in aggregate, rows
/// `sum_{S contains i} sum_theta lambda pi u_i >= C_i`.
pub(crate) fn cce_lp_over(
    inst: &PersuasionInstance,
    objectives: &[SetFunction],
    signals: &[ActionProfile],
) -> LinearProgram {
    let (d, kk) = (inst.d(), signals.len());
    let mut obj = vec![0.0; d * kk];
    for t in 0..d {
        for (k, s) in signals.iter().enumerate() {
            obj[t * kk + k] = inst.prior[t] * objectives[t].eval_mask(s.mask());
        }
    }
    let mut lp = LinearProgram::new(Sense::Maximize, obj);
    for i in 0..inst.n {
        let mut coeffs = vec![0.0; d * kk];
        for t in 0..d {
            for (k, s) in signals.iter().enumerate() {
                if s.contains(i) {
                    coeffs[t * kk + k] = inst.prior[t] * inst.payoff[i][t];
                }
            }
        }
        lp.add_constraint(coeffs, Relation::Ge, inst.prior_opt(i));
    }
    add_normalization(&mut lp, d, kk);
    lp
}

/// Optimal cce-persuasive scheme over all `2^n` signals.
pub fn solve_cce_exact(inst: &PersuasionInstance) -> Result<SchemeSolution> {
    inst.check(false)?;
    check_size(inst.n)?;
    let objectives = inst.objectives()?;
    let signals = all_profiles(inst.n);
    let lp = cce_lp_over(inst, &objectives, &signals);
    let sol = solve_lp(&lp)?.require_optimal("exact cce LP")?;
    Ok(SchemeSolution {
        scheme: scheme_from_solution(inst, &signals, &sol.x)?,
        value: sol.objective,
        candidates: signals.len(),
    })
}
