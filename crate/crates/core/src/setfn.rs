//! Set functions over receivers, their structure, and the combinatorial
//! subroutines the solvers need: completion of partial profiles, unconstrained
//! maximization of `f(S) - w(S)`, and chain (Lovász) evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{full_mask, ActionProfile};

/// Above this many receivers no set function is tabulated.
pub const MAX_TABLE_N: usize = 20;
/// Largest explicit table whose structure is checked by brute force.
pub const MAX_CHECK_N: usize = 16;

const STRUCT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SetFunctionKind {
    /// `values[mask]` with bit `i` of `mask` set iff receiver `i` is in the set.
    Explicit {
        values: Vec<f64>,
    },
    Additive {
        weights: Vec<f64>,
    },
    /// `g[|S|]`.
    Anonymous {
        g: Vec<f64>,
    },
    /// Total weight of elements covered by the chosen receivers.
    Coverage {
        element_weights: Vec<f64>,
        covers: Vec<Vec<usize>>,
    },
    /// Weight of edges with exactly one endpoint in the set.
    Cut {
        n: usize,
        edges: Vec<(usize, usize, f64)>,
    },
}

/// Structural claims attached to a set function. Unset means "not claimed".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submodular: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supermodular: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetFunctionSpec {
    #[serde(flatten)]
    pub kind: SetFunctionKind,
    #[serde(default)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Structure {
    pub monotone: bool,
    pub submodular: bool,
    pub supermodular: bool,
}

impl SetFunctionSpec {
    pub fn new(kind: SetFunctionKind) -> Self {
        SetFunctionSpec {
            kind,
            flags: Flags::default(),
        }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        Self::new(SetFunctionKind::Explicit { values })
    }

    pub fn additive(weights: Vec<f64>) -> Self {
        Self::new(SetFunctionKind::Additive { weights })
    }

    /// `f(S) = |S|`.
    pub fn cardinality(n: usize) -> Self {
        Self::additive(vec![1.0; n])
    }

    pub fn anonymous(g: Vec<f64>) -> Self {
        Self::new(SetFunctionKind::Anonymous { g })
    }

    pub fn coverage(element_weights: Vec<f64>, covers: Vec<Vec<usize>>) -> Self {
        Self::new(SetFunctionKind::Coverage {
            element_weights,
            covers,
        })
    }

    pub fn cut(n: usize, edges: Vec<(usize, usize, f64)>) -> Self {
        Self::new(SetFunctionKind::Cut { n, edges })
    }

    pub fn zero(n: usize) -> Self {
        Self::additive(vec![0.0; n])
    }

    pub fn with_flags(mut self, flags: Flags) -> Self {
        self.flags = flags;
        self
    }

    pub fn n(&self) -> usize {
        match &self.kind {
            SetFunctionKind::Explicit { values } => values.len().max(1).trailing_zeros() as usize,
            SetFunctionKind::Additive { weights } => weights.len(),
            SetFunctionKind::Anonymous { g } => g.len().saturating_sub(1),
            SetFunctionKind::Coverage { covers, .. } => covers.len(),
            SetFunctionKind::Cut { n, .. } => *n,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SetFunctionKind::Explicit { .. } => "explicit",
            SetFunctionKind::Additive { .. } => "additive",
            SetFunctionKind::Anonymous { .. } => "anonymous",
            SetFunctionKind::Coverage { .. } => "coverage",
            SetFunctionKind::Cut { .. } => "cut",
        }
    }

    /// Checks the data (not the declared flags) of the function.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Invalid(what));
        let nonneg = |xs: &[f64], what: &str| -> Result<()> {
            match xs.iter().position(|v| !v.is_finite() || *v < 0.0) {
                Some(k) => Err(Error::Invalid(format!(
                    "{what}[{k}] = {} is not a finite nonnegative number",
                    xs[k]
                ))),
                None => Ok(()),
            }
        };
        match &self.kind {
            SetFunctionKind::Explicit { values } => {
                if values.is_empty() || !values.len().is_power_of_two() {
                    return bad(format!(
                        "explicit table has {} entries, not a power of two",
                        values.len()
                    ));
                }
                if self.n() > MAX_TABLE_N {
                    return Err(Error::CapExceeded(format!(
                        "explicit table over {} receivers (cap {MAX_TABLE_N})",
                        self.n()
                    )));
                }
                nonneg(values, "values")
            }
            SetFunctionKind::Additive { weights } => nonneg(weights, "weights"),
            SetFunctionKind::Anonymous { g } => {
                if g.is_empty() {
                    return bad("anonymous function needs g[0]".into());
                }
                nonneg(g, "g")
            }
            SetFunctionKind::Coverage {
                element_weights,
                covers,
            } => {
                nonneg(element_weights, "element_weights")?;
                for (i, cover) in covers.iter().enumerate() {
                    if let Some(&e) = cover.iter().find(|&&e| e >= element_weights.len()) {
                        return bad(format!(
                            "receiver {i} covers element {e}, universe has {}",
                            element_weights.len()
                        ));
                    }
                }
                Ok(())
            }
            SetFunctionKind::Cut { n, edges } => {
                for &(a, b, w) in edges {
                    if a >= *n || b >= *n || a == b {
                        return bad(format!("cut edge ({a}, {b}) invalid on {n} vertices"));
                    }
                    if !w.is_finite() || w < 0.0 {
                        return bad(format!("cut edge ({a}, {b}) has weight {w}"));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn evaluate(&self, s: &ActionProfile) -> Result<f64> {
        if s.n() != self.n() {
            return Err(Error::Dimension(format!(
                "profile over {} receivers, function over {}",
                s.n(),
                self.n()
            )));
        }
        Ok(self.eval_mask(s.mask()))
    }

    /// Evaluates at a bitmask assumed to fit `self.n()`.
    pub fn eval_mask(&self, mask: u64) -> f64 {
        let has = |i: usize| mask >> i & 1 == 1;
        match &self.kind {
            SetFunctionKind::Explicit { values } => values[mask as usize],
            SetFunctionKind::Additive { weights } => weights
                .iter()
                .enumerate()
                .filter(|(i, _)| has(*i))
                .map(|(_, w)| w)
                .sum(),
            SetFunctionKind::Anonymous { g } => g[mask.count_ones() as usize],
            SetFunctionKind::Coverage {
                element_weights,
                covers,
            } => {
                let mut hit = vec![false; element_weights.len()];
                for (i, cover) in covers.iter().enumerate() {
                    if has(i) {
                        for &e in cover {
                            hit[e] = true;
                        }
                    }
                }
                hit.iter()
                    .zip(element_weights)
                    .filter(|(h, _)| **h)
                    .map(|(_, w)| w)
                    .sum()
            }
            SetFunctionKind::Cut { edges, .. } => edges
                .iter()
                .filter(|(a, b, _)| has(*a) != has(*b))
                .map(|(_, _, w)| w)
                .sum(),
        }
    }

    /// All `2^n` values indexed by mask.
    pub fn table(&self) -> Result<Vec<f64>> {
        let n = self.n();
        if n > MAX_TABLE_N {
            return Err(Error::CapExceeded(format!(
                "tabulating {n} receivers (cap {MAX_TABLE_N})"
            )));
        }
        if let SetFunctionKind::Explicit { values } = &self.kind {
            return Ok(values.clone());
        }
        Ok((0..1u64 << n).map(|m| self.eval_mask(m)).collect())
    }

    /// Structure implied by the construction, or `None` when it must be checked.
    fn intrinsic_structure(&self) -> Option<Structure> {
        match &self.kind {
            SetFunctionKind::Additive { .. } => Some(Structure {
                monotone: true,
                submodular: true,
                supermodular: true,
            }),
            SetFunctionKind::Coverage { .. } => Some(Structure {
                monotone: true,
                submodular: true,
                supermodular: false,
            }),
            SetFunctionKind::Cut { .. } => Some(Structure {
                monotone: false,
                submodular: true,
                supermodular: false,
            }),
            SetFunctionKind::Anonymous { g } => {
                let inc: Vec<f64> = g.windows(2).map(|w| w[1] - w[0]).collect();
                let tol = STRUCT_TOL * (1.0 + g.iter().fold(0.0f64, |a, v| a.max(v.abs())));
                Some(Structure {
                    monotone: inc.iter().all(|d| *d >= -tol),
                    submodular: inc.windows(2).all(|w| w[1] <= w[0] + tol),
                    supermodular: inc.windows(2).all(|w| w[1] >= w[0] - tol),
                })
            }
            SetFunctionKind::Explicit { .. } => None,
        }
    }
}

/// Brute-force structure of a table indexed by mask. Uses the local forms
/// `f(S+i) >= f(S)` and `f(S+i) + f(S+j) >= f(S) + f(S+i+j)`, which are
/// equivalent to the global definitions.
pub fn check_structure(values: &[f64]) -> Result<Structure> {
    if values.is_empty() || !values.len().is_power_of_two() {
        return Err(Error::Invalid(format!(
            "table of length {} is not 2^n",
            values.len()
        )));
    }
    let n = values.len().trailing_zeros() as usize;
    if n > MAX_CHECK_N {
        return Err(Error::CapExceeded(format!(
            "structure check over {n} receivers (cap {MAX_CHECK_N})"
        )));
    }
    let tol = STRUCT_TOL * (1.0 + values.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let mut st = Structure {
        monotone: true,
        submodular: true,
        supermodular: true,
    };
    for s in 0..values.len() {
        for i in (0..n).filter(|i| s >> i & 1 == 0) {
            let si = s | 1 << i;
            if values[si] < values[s] - tol {
                st.monotone = false;
            }
            for j in (i + 1..n).filter(|j| s >> j & 1 == 0) {
                let sj = s | 1 << j;
                let d = values[si] + values[sj] - values[s] - values[si | sj];
                if d < -tol {
                    st.submodular = false;
                }
                if d > tol {
                    st.supermodular = false;
                }
            }
        }
    }
    Ok(st)
}

/// A set function whose structural flags have been established, either by
/// construction or by brute-force verification of a declared table.
#[derive(Debug, Clone, PartialEq)]
pub struct SetFunction {
    spec: SetFunctionSpec,
    structure: Structure,
}

impl SetFunction {
    pub fn new(spec: SetFunctionSpec) -> Result<Self> {
        spec.validate()?;
        let structure = match spec.intrinsic_structure() {
            Some(s) => s,
            None => {
                let SetFunctionKind::Explicit { values } = &spec.kind else {
                    unreachable!("only explicit tables lack intrinsic structure")
                };
                if spec.n() <= MAX_CHECK_N {
                    check_structure(values)?
                } else if spec.flags != Flags::default() {
                    return Err(Error::Unsupported(format!(
                        "flags on a {}-receiver table cannot be verified (cap {MAX_CHECK_N})",
                        spec.n()
                    )));
                } else {
                    Structure {
                        monotone: false,
                        submodular: false,
                        supermodular: false,
                    }
                }
            }
        };
        let claims = [
            ("monotone", spec.flags.monotone, structure.monotone),
            ("submodular", spec.flags.submodular, structure.submodular),
            (
                "supermodular",
                spec.flags.supermodular,
                structure.supermodular,
            ),
        ];
        for (name, declared, actual) in claims {
            if declared == Some(true) && !actual {
                return Err(Error::Invalid(format!(
                    "declared {name} but verification fails"
                )));
            }
        }
        Ok(SetFunction { spec, structure })
    }

    pub fn spec(&self) -> &SetFunctionSpec {
        &self.spec
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn eval_mask(&self, mask: u64) -> f64 {
        self.spec.eval_mask(mask)
    }

    pub fn evaluate(&self, s: &ActionProfile) -> Result<f64> {
        self.spec.evaluate(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompletionStrategy {
    AllOnes,
    Exhaustive,
    DoubleGreedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub profile: ActionProfile,
    pub value: f64,
    pub alpha: f64,
    pub strategy: CompletionStrategy,
}

/// Largest free set searched exhaustively.
pub const MAX_EXHAUSTIVE_FREE: usize = 20;

/// Completes `fixed` on the receivers in `free` (bits of `fixed` inside `free`
/// are ignored). The returned value is at least `alpha` times the best
/// completion.
pub fn alpha_subroutine(
    f: &SetFunction,
    fixed: &ActionProfile,
    free: &[usize],
) -> Result<Completion> {
    let n = f.n();
    if fixed.n() != n {
        return Err(Error::Dimension(format!(
            "fixed profile over {} receivers, function over {n}",
            fixed.n()
        )));
    }
    let mut free_mask = 0u64;
    for &i in free {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        free_mask |= 1 << i;
    }
    let base = fixed.mask() & !free_mask;
    let done = |mask: u64, alpha: f64, strategy| Completion {
        profile: ActionProfile::raw(n, mask),
        value: f.eval_mask(mask),
        alpha,
        strategy,
    };
    let st = f.structure();
    if st.monotone {
        return Ok(done(base | free_mask, 1.0, CompletionStrategy::AllOnes));
    }
    let order: Vec<usize> = (0..n).filter(|i| free_mask >> i & 1 == 1).collect();
    if matches!(f.spec.kind, SetFunctionKind::Explicit { .. }) && order.len() <= MAX_EXHAUSTIVE_FREE
    {
        let (mask, _) = best_extension(f, base, &order, |_| 0.0);
        return Ok(done(mask, 1.0, CompletionStrategy::Exhaustive));
    }
    if st.submodular {
        let mut x = base;
        let mut y = base | free_mask;
        for &e in &order {
            let gain_add = f.eval_mask(x | 1 << e) - f.eval_mask(x);
            let gain_drop = f.eval_mask(y & !(1 << e)) - f.eval_mask(y);
            if gain_add >= gain_drop {
                x |= 1 << e;
            } else {
                y &= !(1 << e);
            }
        }
        debug_assert_eq!(x, y);
        return Ok(done(x, 0.5, CompletionStrategy::DoubleGreedy));
    }
    Err(Error::Unsupported(format!(
        "no completion strategy for a non-monotone, non-submodular {} function with {} free receivers",
        f.spec.kind_name(),
        order.len()
    )))
}

/// Exhaustive `argmax` of `f(base | X) - penalty(X)` over subsets `X` of
/// `order`; ties keep the earliest subset in binary counting order.
fn best_extension(
    f: &SetFunction,
    base: u64,
    order: &[usize],
    penalty: impl Fn(u64) -> f64,
) -> (u64, f64) {
    let mut best = (base, f.eval_mask(base) - penalty(base));
    for sub in 1..1u64 << order.len() {
        let mut mask = base;
        for (k, &i) in order.iter().enumerate() {
            if sub >> k & 1 == 1 {
                mask |= 1 << i;
            }
        }
        let v = f.eval_mask(mask) - penalty(mask);
        if v > best.1 {
            best = (mask, v);
        }
    }
    best
}

fn linear_cost(w: &[f64], mask: u64) -> f64 {
    w.iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, x)| x)
        .sum()
}

/// `argmax_S f(S) - sum_{i in S} w_i` with its value.
pub fn maximize_minus_linear(f: &SetFunctionSpec, w: &[f64]) -> Result<(ActionProfile, f64)> {
    let n = f.n();
    if w.len() != n {
        return Err(Error::Dimension(format!(
            "{} weights for {n} receivers",
            w.len()
        )));
    }
    match &f.kind {
        SetFunctionKind::Additive { weights } => {
            let mask = weights
                .iter()
                .zip(w)
                .enumerate()
                .filter(|(_, (a, wi))| *a - *wi > 0.0)
                .fold(0u64, |m, (i, _)| m | 1 << i);
            let value = weights.iter().zip(w).map(|(a, wi)| (a - wi).max(0.0)).sum();
            Ok((ActionProfile::raw(n, mask), value))
        }
        SetFunctionKind::Anonymous { g } => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| w[a].total_cmp(&w[b]));
            let (mut best_k, mut best) = (0, g[0]);
            let mut cost = 0.0;
            for k in 1..=n {
                cost += w[idx[k - 1]];
                let v = g[k] - cost;
                if v > best {
                    best = v;
                    best_k = k;
                }
            }
            let mask = idx[..best_k].iter().fold(0u64, |m, &i| m | 1 << i);
            Ok((ActionProfile::raw(n, mask), best))
        }
        _ if n <= MAX_TABLE_N => {
            let func = SetFunction {
                spec: f.clone(),
                structure: Structure {
                    monotone: false,
                    submodular: false,
                    supermodular: false,
                },
            };
            let order: Vec<usize> = (0..n).collect();
            let (mask, v) = best_extension(&func, 0, &order, |m| linear_cost(w, m));
            Ok((ActionProfile::raw(n, mask), v))
        }
        _ => Err(Error::Unsupported(format!(
            "maximizing a {} function minus a linear term over {n} receivers",
            f.kind_name()
        ))),
    }
}

/// Distribution over the prefixes of an ordering of the receivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDistribution {
    /// Receivers by nonincreasing marginal; `sets[k]` holds the first `k`.
    pub order: Vec<usize>,
    pub sets: Vec<ActionProfile>,
    pub probs: Vec<f64>,
}

impl ChainDistribution {
    pub fn marginal(&self, i: usize) -> f64 {
        self.sets
            .iter()
            .zip(&self.probs)
            .filter(|(s, _)| s.contains(i))
            .map(|(_, p)| p)
            .sum()
    }
}

/// The chain distribution with marginals `x` and `E f` under it. For a
/// submodular `f` this is the least expected value among all distributions
/// with those marginals.
pub fn lovasz_chain_value(f: &SetFunctionSpec, x: &[f64]) -> Result<(ChainDistribution, f64)> {
    let n = f.n();
    if x.len() != n {
        return Err(Error::Dimension(format!(
            "{} marginals for {n} receivers",
            x.len()
        )));
    }
    if let Some(i) = x.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Invalid(format!(
            "marginal x[{i}] = {} outside [0, 1]",
            x[i]
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]));
    let level = |k: usize| match k {
        0 => 1.0,
        k if k > n => 0.0,
        k => x[order[k - 1]],
    };
    let mut sets = Vec::with_capacity(n + 1);
    let mut probs = Vec::with_capacity(n + 1);
    let mut mask = 0u64;
    let mut value = 0.0;
    for k in 0..=n {
        if k > 0 {
            mask |= 1 << order[k - 1];
        }
        let p = level(k) - level(k + 1);
        value += p * f.eval_mask(mask);
        sets.push(ActionProfile::raw(n, mask));
        probs.push(p);
    }
    debug_assert!(mask == full_mask(n));
    Ok((ChainDistribution { order, sets, probs }, value))
}
