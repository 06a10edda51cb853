//! Persuasion instances, public signaling schemes, Bayes posteriors and
//! persuasiveness verification.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{ActionProfile, MAX_RECEIVERS};
use crate::setfn::{SetFunction, SetFunctionSpec};

/// Tolerance of every persuasiveness inequality.
pub const PERSUASION_TOL: f64 = 1e-7;
/// Prior and posterior normalization tolerance.
pub const PRIOR_TOL: f64 = 1e-9;
/// Scheme rows must sum to one within this.
pub const ROW_TOL: f64 = 1e-7;
/// Signals emitted with less total probability are not checked.
pub const NEGLIGIBLE_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Objective {
    Shared(SetFunctionSpec),
    PerState(Vec<SetFunctionSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersuasionInstance {
    pub n: usize,
    pub states: Vec<String>,
    pub prior: Vec<f64>,
    /// `payoff[i][theta]`: receiver `i`'s net preference for action 1.
    pub payoff: Vec<Vec<f64>>,
    pub objective: Objective,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let text: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect();
        Err(Error::Invalid(text.join("; ")))
    }
}

impl PersuasionInstance {
    /// States named `t0, t1, ...`.
    pub fn new(prior: Vec<f64>, payoff: Vec<Vec<f64>>, objective: Objective) -> Self {
        PersuasionInstance {
            n: payoff.len(),
            states: (0..prior.len()).map(|t| format!("t{t}")).collect(),
            prior,
            payoff,
            objective,
        }
    }

    pub fn d(&self) -> usize {
        self.prior.len()
    }

    /// Checks every invariant; `eps_mode` adds the `|u| <= 1` requirement.
    pub fn validate(&self, eps_mode: bool) -> ValidationResult {
        let mut out = ValidationResult::default();
        let d = self.prior.len();
        if self.n == 0 {
            out.push("n", "at least one receiver is required");
        }
        if self.n > MAX_RECEIVERS {
            out.push(
                "n",
                format!("{} receivers exceeds the supported {MAX_RECEIVERS}", self.n),
            );
        }
        if d == 0 {
            out.push("prior", "at least one state is required");
        }
        if self.states.len() != d {
            out.push(
                "states",
                format!("{} state names for {d} prior entries", self.states.len()),
            );
        }
        let mut seen = HashSet::new();
        for s in &self.states {
            if !seen.insert(s) {
                out.push("states", format!("duplicate state name {s:?}"));
            }
        }
        for (t, &p) in self.prior.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                out.push(format!("prior[{t}]"), format!("{p} is not a probability"));
            } else if p == 0.0 {
                out.push(format!("prior[{t}]"), "zero-probability state; remove it");
            }
        }
        let total: f64 = self.prior.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOL {
            out.push("prior", format!("prior sums to {total}"));
        }
        if self.payoff.len() != self.n {
            out.push(
                "payoff",
                format!("{} rows for {} receivers", self.payoff.len(), self.n),
            );
        }
        for (i, row) in self.payoff.iter().enumerate() {
            if row.len() != d {
                out.push(
                    format!("payoff[{i}]"),
                    format!("{} entries for {d} states", row.len()),
                );
            }
            for (t, &u) in row.iter().enumerate() {
                if !u.is_finite() {
                    out.push(format!("payoff[{i}][{t}]"), "not finite");
                } else if eps_mode && u.abs() > 1.0 {
                    out.push(
                        format!("payoff[{i}][{t}]"),
                        format!("payoff {u} out of [-1,1]"),
                    );
                }
            }
        }
        let specs: Vec<(String, &SetFunctionSpec)> = match &self.objective {
            Objective::Shared(f) => vec![("objective".into(), f)],
            Objective::PerState(fs) => {
                if fs.len() != d {
                    out.push(
                        "objective",
                        format!("{} per-state functions for {d} states", fs.len()),
                    );
                }
                fs.iter()
                    .enumerate()
                    .map(|(t, f)| (format!("objective[{t}]"), f))
                    .collect()
            }
        };
        for (field, f) in specs {
            if f.n() != self.n {
                out.push(
                    &field,
                    format!("function over {} receivers, instance has {}", f.n(), self.n),
                );
                continue;
            }
            if let Err(e) = SetFunction::new(f.clone()) {
                out.push(&field, e.to_string());
            }
        }
        out
    }

    pub fn check(&self, eps_mode: bool) -> Result<()> {
        self.validate(eps_mode).into_result()
    }

    /// One resolved set function per state.
    pub fn objectives(&self) -> Result<Vec<SetFunction>> {
        match &self.objective {
            Objective::Shared(f) => {
                let f = SetFunction::new(f.clone())?;
                Ok(vec![f; self.d()])
            }
            Objective::PerState(fs) => fs.iter().cloned().map(SetFunction::new).collect(),
        }
    }

    /// The common objective when every state uses the same function.
    pub fn shared_objective(&self) -> Option<&SetFunctionSpec> {
        match &self.objective {
            Objective::Shared(f) => Some(f),
            Objective::PerState(fs) => {
                let first = fs.first()?;
                fs.iter().all(|f| f == first).then_some(first)
            }
        }
    }

    /// `sum_theta w_theta u_i(theta)`.
    pub fn weighted_payoff(&self, i: usize, weights: &[f64]) -> f64 {
        self.payoff[i].iter().zip(weights).map(|(u, w)| u * w).sum()
    }

    /// Receiver `i`'s expected net payoff for action 1 under the prior.
    pub fn prior_payoff(&self, i: usize) -> f64 {
        self.weighted_payoff(i, &self.prior)
    }

    /// `C_i = max(prior_payoff(i), 0)`: value of best-responding to the prior.
    pub fn prior_opt(&self, i: usize) -> f64 {
        self.prior_payoff(i).max(0.0)
    }

    /// Each receiver's best response to the prior (ties toward action 1).
    pub fn prior_profile(&self) -> ActionProfile {
        let mask = (0..self.n)
            .filter(|&i| self.prior_payoff(i) >= 0.0)
            .fold(0u64, |m, i| m | 1 << i);
        ActionProfile::raw(self.n, mask)
    }
}

/// A public signaling scheme over action-profile signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicScheme {
    pub signals: Vec<ActionProfile>,
    /// `probs[theta][k]`.
    pub probs: Vec<Vec<f64>>,
}

impl PublicScheme {
    /// Validates shape, nonnegativity and row sums; clamps tiny negatives.
    pub fn new(signals: Vec<ActionProfile>, mut probs: Vec<Vec<f64>>) -> Result<Self> {
        let k = signals.len();
        if signals.iter().collect::<HashSet<_>>().len() != k {
            return Err(Error::Invalid("scheme lists a signal profile twice".into()));
        }
        if let Some(n) = signals.first().map(ActionProfile::n) {
            if signals.iter().any(|s| s.n() != n) {
                return Err(Error::Dimension("signals have different lengths".into()));
            }
        }
        for (t, row) in probs.iter_mut().enumerate() {
            if row.len() != k {
                return Err(Error::Dimension(format!(
                    "row {t} has {} entries for {k} signals",
                    row.len()
                )));
            }
            for p in row.iter_mut() {
                if !p.is_finite() || *p < -NEGLIGIBLE_MASS {
                    return Err(Error::Invalid(format!("row {t} has probability {p}")));
                }
                *p = p.max(0.0);
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_TOL {
                return Err(Error::Invalid(format!("row {t} sums to {total}")));
            }
        }
        Ok(PublicScheme { signals, probs })
    }

    /// Sums the rows of repeated profiles into one signal each.
    pub fn merging(signals: Vec<ActionProfile>, probs: Vec<Vec<f64>>) -> Result<Self> {
        let mut uniq: Vec<ActionProfile> = Vec::new();
        let mut slot = Vec::with_capacity(signals.len());
        for s in &signals {
            match uniq.iter().position(|u| u == s) {
                Some(k) => slot.push(k),
                None => {
                    slot.push(uniq.len());
                    uniq.push(*s);
                }
            }
        }
        let merged = probs
            .iter()
            .map(|row| {
                let mut out = vec![0.0; uniq.len()];
                for (k, p) in row.iter().enumerate() {
                    out[slot[k]] += p;
                }
                out
            })
            .collect();
        Self::new(uniq, merged)
    }

    /// One signal emitted with probability one in each of `d` states.
    pub fn uninformative(profile: ActionProfile, d: usize) -> Self {
        PublicScheme {
            signals: vec![profile],
            probs: vec![vec![1.0]; d],
        }
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn check_against(&self, inst: &PersuasionInstance) -> Result<()> {
        if self.probs.len() != inst.d() {
            return Err(Error::Dimension(format!(
                "scheme has {} state rows, instance has {} states",
                self.probs.len(),
                inst.d()
            )));
        }
        if let Some(s) = self.signals.iter().find(|s| s.n() != inst.n) {
            return Err(Error::Dimension(format!(
                "signal over {} receivers, instance has {}",
                s.n(),
                inst.n
            )));
        }
        Ok(())
    }

    /// `sum_theta lambda_theta pi(theta, k)`.
    pub fn signal_mass(&self, inst: &PersuasionInstance, k: usize) -> f64 {
        inst.prior
            .iter()
            .zip(&self.probs)
            .map(|(l, row)| l * row[k])
            .sum()
    }

    /// Drops signals below `threshold` total mass and renormalizes rows.
    pub fn pruned(&self, inst: &PersuasionInstance, threshold: f64) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&k| self.signal_mass(inst, k) >= threshold)
            .collect();
        let probs = self
            .probs
            .iter()
            .map(|row| {
                let kept: Vec<f64> = keep.iter().map(|&k| row[k]).collect();
                let total: f64 = kept.iter().sum();
                if total > 0.0 {
                    kept.iter().map(|p| p / total).collect()
                } else {
                    kept
                }
            })
            .collect();
        Self::new(keep.iter().map(|&k| self.signals[k]).collect(), probs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalBelief {
    Posterior(Posterior),
    ZeroProbability,
}

pub fn posterior_of_signal(
    inst: &PersuasionInstance,
    scheme: &PublicScheme,
    k: usize,
) -> Result<SignalBelief> {
    scheme.check_against(inst)?;
    if k >= scheme.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: scheme.len(),
        });
    }
    let joint: Vec<f64> = inst
        .prior
        .iter()
        .zip(&scheme.probs)
        .map(|(l, row)| l * row[k])
        .collect();
    let total: f64 = joint.iter().sum();
    if total < NEGLIGIBLE_MASS {
        return Ok(SignalBelief::ZeroProbability);
    }
    Ok(SignalBelief::Posterior(Posterior {
        p: joint.iter().map(|j| j / total).collect(),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "eps", rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Eps(f64),
    Cce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersuasivenessReport {
    pub mode: Mode,
    pub passed: bool,
    /// `slack[k][i] = sum_theta lambda_theta pi(theta, k) u_i(theta)`.
    pub slack: Vec<Vec<f64>>,
    pub cce_lhs: Vec<f64>,
    pub prior_opt: Vec<f64>,
    pub sender_value: f64,
    /// Largest amount by which a checked inequality fails (0 when none does).
    pub max_violation: f64,
}

pub fn verify_scheme(
    inst: &PersuasionInstance,
    scheme: &PublicScheme,
    mode: Mode,
) -> Result<PersuasivenessReport> {
    inst.check(matches!(mode, Mode::Eps(_)))?;
    scheme.check_against(inst)?;
    let eps = match mode {
        Mode::Eps(e) if !(e.is_finite() && e >= 0.0) => {
            return Err(Error::Invalid(format!("eps = {e} must be nonnegative")))
        }
        Mode::Eps(e) => e,
        _ => 0.0,
    };
    let objectives = inst.objectives()?;
    let (n, kk) = (inst.n, scheme.len());
    let mut slack = vec![vec![0.0; n]; kk];
    let mut cce_lhs = vec![0.0; n];
    let mut sender_value = 0.0;
    let mut worst: f64 = 0.0;
    for (k, s) in scheme.signals.iter().enumerate() {
        let joint: Vec<f64> = inst
            .prior
            .iter()
            .zip(&scheme.probs)
            .map(|(l, r)| l * r[k])
            .collect();
        for (t, j) in joint.iter().enumerate() {
            sender_value += j * objectives[t].eval_mask(s.mask());
        }
        let checked = joint.iter().sum::<f64>() >= NEGLIGIBLE_MASS;
        for i in 0..n {
            let v = inst.weighted_payoff(i, &joint);
            slack[k][i] = v;
            if s.contains(i) {
                cce_lhs[i] += v;
            }
            if checked && mode != Mode::Cce {
                let miss = if s.contains(i) { -eps - v } else { v - eps };
                worst = worst.max(miss);
            }
        }
    }
    let prior_opt: Vec<f64> = (0..n).map(|i| inst.prior_opt(i)).collect();
    if mode == Mode::Cce {
        for i in 0..n {
            worst = worst.max(prior_opt[i] - cce_lhs[i]);
        }
    }
    Ok(PersuasivenessReport {
        mode,
        passed: worst <= PERSUASION_TOL,
        slack,
        cce_lhs,
        prior_opt,
        sender_value,
        max_violation: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_receiver() -> PersuasionInstance {
        PersuasionInstance::new(
            vec![0.5, 0.5],
            vec![vec![1.0, -3.0]],
            Objective::Shared(SetFunctionSpec::cardinality(1)),
        )
    }

    fn profile(bits: &[u8]) -> ActionProfile {
        ActionProfile::from_bits(bits).unwrap()
    }

    #[test]
    fn validation_messages() {
        assert!(PersuasionInstance::new(
            vec![0.5, 0.5],
            vec![vec![1.0, -1.0]],
            Objective::Shared(SetFunctionSpec::cardinality(1))
        )
        .validate(false)
        .is_ok());
        let mut bad = one_receiver();
        bad.prior = vec![0.6, 0.6];
        let res = bad.validate(false);
        assert!(res
            .violations
            .iter()
            .any(|v| v.message == "prior sums to 1.2"));
        let mut wide = one_receiver();
        wide.payoff = vec![vec![1.5, -1.0]];
        assert!(wide.validate(false).is_ok());
        assert!(wide
            .validate(true)
            .violations
            .iter()
            .any(|v| v.message.contains("out of [-1,1]")));
    }

    #[test]
    fn bayes_update() {
        let inst = one_receiver();
        let scheme = PublicScheme::new(
            vec![profile(&[1]), profile(&[0])],
            vec![vec![1.0, 0.0], vec![1.0 / 3.0, 2.0 / 3.0]],
        )
        .unwrap();
        let SignalBelief::Posterior(p) = posterior_of_signal(&inst, &scheme, 0).unwrap() else {
            panic!("signal has mass");
        };
        assert!((p.p[0] - 0.75).abs() < 1e-12 && (p.p[1] - 0.25).abs() < 1e-12);
        assert!(posterior_of_signal(&inst, &scheme, 2).is_err());
    }

    #[test]
    fn zero_probability_signal() {
        let inst = one_receiver();
        let scheme = PublicScheme::new(
            vec![profile(&[1]), profile(&[0])],
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
        )
        .unwrap();
        assert_eq!(
            posterior_of_signal(&inst, &scheme, 1).unwrap(),
            SignalBelief::ZeroProbability
        );
    }

    #[test]
    fn one_receiver_scheme_is_persuasive() {
        let inst = one_receiver();
        let scheme = PublicScheme::new(
            vec![profile(&[1]), profile(&[0])],
            vec![vec![1.0, 0.0], vec![1.0 / 3.0, 2.0 / 3.0]],
        )
        .unwrap();
        for mode in [Mode::Exact, Mode::Cce] {
            let rep = verify_scheme(&inst, &scheme, mode).unwrap();
            assert!(rep.passed, "{mode:?}: {rep:?}");
        }
        let rep = verify_scheme(&inst, &scheme, Mode::Exact).unwrap();
        assert!(rep.slack[0][0].abs() < 1e-12);
        assert!((rep.sender_value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_example_uninformative() {
        let inst = PersuasionInstance::new(
            vec![0.5, 0.5],
            vec![vec![1.0, -1.0]; 3],
            Objective::Shared(SetFunctionSpec::cardinality(3)),
        );
        let scheme = PublicScheme::uninformative(ActionProfile::full(3).unwrap(), 2);
        let rep = verify_scheme(&inst, &scheme, Mode::Exact).unwrap();
        assert!(rep.passed && rep.slack[0].iter().all(|s| s.abs() < 1e-15));
        assert_eq!(rep.sender_value, 3.0);
        assert!(
            verify_scheme(&inst, &scheme, Mode::Eps(0.1))
                .unwrap()
                .passed
        );
    }

    #[test]
    fn scheme_rows_checked() {
        assert!(PublicScheme::new(vec![profile(&[1])], vec![vec![0.9]]).is_err());
        assert!(
            PublicScheme::new(vec![profile(&[1]), profile(&[1])], vec![vec![0.5, 0.5]]).is_err()
        );
        let merged =
            PublicScheme::merging(vec![profile(&[1]), profile(&[1])], vec![vec![0.5, 0.5]])
                .unwrap();
        assert_eq!(merged.probs, vec![vec![1.0]]);
        let clamped =
            PublicScheme::new(vec![profile(&[1]), profile(&[0])], vec![vec![1.0, -1e-13]]).unwrap();
        assert_eq!(clamped.probs[0][1], 0.0);
    }

    #[test]
    fn json_round_trip() {
        let inst = one_receiver();
        let text = serde_json::to_string(&inst).unwrap();
        assert_eq!(
            serde_json::from_str::<PersuasionInstance>(&text).unwrap(),
            inst
        );
        let per_state = r#"{"n":1,"states":["a","b"],"prior":[0.5,0.5],"payoff":[[1,-1]],
            "objective":[{"kind":"additive","weights":[1]},{"kind":"additive","weights":[0]}]}"#;
        let inst: PersuasionInstance = serde_json::from_str(per_state).unwrap();
        assert!(matches!(inst.objective, Objective::PerState(ref v) if v.len() == 2));
        assert!(inst.shared_objective().is_none());
    }
}
