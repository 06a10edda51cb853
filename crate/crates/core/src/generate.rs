//! Seeded instance generators. Every generator draws from a `ChaCha8Rng`
//! seeded with `seed_from_u64`, so a seed fixes the output on every platform.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::auction::{AuctionInstance, BidderType};
use crate::cce::ReductionSpec;
use crate::error::{Error, Result};
use crate::instance::{Objective, PersuasionInstance};
use crate::setfn::{Flags, SetFunctionSpec, MAX_TABLE_N};

/// Above this many receivers random-uniform objectives are additive instead of tabulated.
pub const RANDOM_TABLE_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    RandomUniform,
    Example31,
    CceReduction,
    SupermodularIndicator,
    RandomCoverage,
    RandomCut,
    RandomAuction,
}

impl GenKind {
    pub const ALL: [GenKind; 7] = [
        GenKind::RandomUniform,
        GenKind::Example31,
        GenKind::CceReduction,
        GenKind::SupermodularIndicator,
        GenKind::RandomCoverage,
        GenKind::RandomCut,
        GenKind::RandomAuction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GenKind::RandomUniform => "random-uniform",
            GenKind::Example31 => "example-3-1",
            GenKind::CceReduction => "cce-reduction",
            GenKind::SupermodularIndicator => "supermodular-indicator",
            GenKind::RandomCoverage => "random-coverage",
            GenKind::RandomCut => "random-cut",
            GenKind::RandomAuction => "random-auction",
        }
    }
}

impl FromStr for GenKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GenKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown generator {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub states: usize,
    /// Bidder types, auctions only.
    pub types: usize,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n: 4,
            states: 2,
            types: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Generated {
    Instance(PersuasionInstance),
    Reduction(ReductionSpec),
    Auction(AuctionInstance),
    Function(SetFunctionSpec),
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point of the simplex: normalized independent exponentials.
pub fn dirichlet(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    let draws: Vec<f64> = (0..d)
        .map(|_| rng.sample::<f64, _>(Exp1).max(1e-300))
        .collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|x| x / total).collect()
}

pub fn uniform_payoffs(n: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect()
}

/// Table with independent `U[0,1]` values.
pub fn random_explicit(n: usize, rng: &mut impl Rng) -> SetFunctionSpec {
    SetFunctionSpec::explicit((0..1u64 << n).map(|_| rng.gen::<f64>()).collect())
}

pub fn random_coverage(n: usize, rng: &mut impl Rng) -> SetFunctionSpec {
    let m = 2 * n.max(1);
    let weights = (0..m).map(|_| rng.gen_range(0.1..=1.0)).collect();
    let covers = (0..n)
        .map(|_| {
            let mut c: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.3)).collect();
            if c.is_empty() {
                c.push(rng.gen_range(0..m));
            }
            c
        })
        .collect();
    SetFunctionSpec::coverage(weights, covers)
}

/// Weighted cut of a `G(n, 1/2)` graph.
pub fn random_cut(n: usize, rng: &mut impl Rng) -> SetFunctionSpec {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(0.5) {
                edges.push((a, b, rng.gen_range(0.1..=1.0)));
            }
        }
    }
    SetFunctionSpec::cut(n, edges)
}

/// Explicit table of a random submodular function: concave functions of
/// random modular weights plus a random cut, generally non-monotone.
pub fn random_submodular_table(n: usize, rng: &mut impl Rng) -> SetFunctionSpec {
    let terms: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..n).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let cut = random_cut(n, rng);
    let values = (0..1u64 << n)
        .map(|mask| {
            let concave: f64 = terms
                .iter()
                .map(|w| {
                    (0..n)
                        .filter(|&i| mask >> i & 1 == 1)
                        .map(|i| w[i])
                        .sum::<f64>()
                        .sqrt()
                })
                .sum();
            concave + cut.eval_mask(mask)
        })
        .collect();
    SetFunctionSpec::explicit(values).with_flags(Flags {
        submodular: Some(true),
        ..Flags::default()
    })
}

/// `1` on the full set and `0` elsewhere.
pub fn supermodular_indicator(n: usize) -> SetFunctionSpec {
    let mut values = vec![0.0; 1 << n];
    values[(1 << n) - 1] = 1.0;
    SetFunctionSpec::explicit(values).with_flags(Flags {
        monotone: Some(true),
        supermodular: Some(true),
        ..Flags::default()
    })
}

pub fn random_uniform_instance(n: usize, d: usize, rng: &mut impl Rng) -> PersuasionInstance {
    let prior = dirichlet(d, rng);
    let payoff = uniform_payoffs(n, d, rng);
    let objective = (0..d)
        .map(|_| {
            if n <= RANDOM_TABLE_N {
                random_explicit(n, rng)
            } else {
                SetFunctionSpec::additive((0..n).map(|_| rng.gen::<f64>()).collect())
            }
        })
        .collect();
    PersuasionInstance::new(prior, payoff, Objective::PerState(objective))
}

/// Instance with uniform payoffs sharing one objective across states.
pub fn shared_instance(f: SetFunctionSpec, d: usize, rng: &mut impl Rng) -> PersuasionInstance {
    let n = f.n();
    let prior = dirichlet(d, rng);
    let payoff = uniform_payoffs(n, d, rng);
    PersuasionInstance::new(prior, payoff, Objective::Shared(f))
}

/// Every receiver's payoff is `(1, -1)` under a uniform prior, objective `|S|`.
pub fn example_3_1(n: usize) -> PersuasionInstance {
    PersuasionInstance::new(
        vec![0.5, 0.5],
        vec![vec![1.0, -1.0]; n],
        Objective::Shared(SetFunctionSpec::cardinality(n)),
    )
}

pub fn random_reduction_spec(n: usize, rng: &mut impl Rng) -> ReductionSpec {
    let f = random_explicit(n, rng);
    let beta = (0..n).map(|_| rng.gen::<f64>()).collect();
    let mut s_plus = Vec::new();
    let mut s_minus = Vec::new();
    for i in 0..n {
        if rng.gen_bool(0.5) {
            s_plus.push(i);
        } else {
            s_minus.push(i);
        }
    }
    ReductionSpec {
        f,
        beta,
        s_plus,
        s_minus,
    }
}

pub fn random_auction(n: usize, d: usize, types: usize, rng: &mut impl Rng) -> AuctionInstance {
    let prior = dirichlet(d, rng);
    let q = dirichlet(types, rng);
    let types = q
        .into_iter()
        .map(|q| BidderType {
            q,
            values: (0..n)
                .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
                .collect(),
        })
        .collect();
    AuctionInstance {
        n,
        states: (0..d).map(|t| format!("t{t}")).collect(),
        prior,
        types,
    }
}

pub fn generate(kind: GenKind, p: GenParams) -> Result<Generated> {
    let tabulated = matches!(kind, GenKind::CceReduction | GenKind::SupermodularIndicator);
    if p.n == 0 || (tabulated && p.n > MAX_TABLE_N) {
        return Err(Error::Invalid(format!(
            "{} needs 1 <= n <= {MAX_TABLE_N}, got {}",
            kind.name(),
            p.n
        )));
    }
    if p.n > crate::profile::MAX_RECEIVERS {
        return Err(Error::Invalid(format!(
            "n = {} exceeds {}",
            p.n,
            crate::profile::MAX_RECEIVERS
        )));
    }
    if p.states == 0 || (kind == GenKind::RandomAuction && p.types == 0) {
        return Err(Error::Invalid("states and types must be positive".into()));
    }
    let mut r = rng(p.seed);
    Ok(match kind {
        GenKind::RandomUniform => {
            Generated::Instance(random_uniform_instance(p.n, p.states, &mut r))
        }
        GenKind::Example31 => Generated::Instance(example_3_1(p.n)),
        GenKind::CceReduction => Generated::Reduction(random_reduction_spec(p.n, &mut r)),
        GenKind::SupermodularIndicator => Generated::Function(supermodular_indicator(p.n)),
        GenKind::RandomCoverage => {
            let f = random_coverage(p.n, &mut r);
            Generated::Instance(shared_instance(f, p.states, &mut r))
        }
        GenKind::RandomCut => {
            let f = random_cut(p.n, &mut r);
            Generated::Instance(shared_instance(f, p.states, &mut r))
        }
        GenKind::RandomAuction => {
            if p.n < 2 {
                return Err(Error::Invalid("an auction needs at least 2 bidders".into()));
            }
            Generated::Auction(random_auction(p.n, p.states, p.types, &mut r))
        }
    })
}
