//! Public signaling for revenue in a second-price auction. Posteriors are
//! grouped by the ranking of bidders that each type induces; the comparison
//! hyperplanes cut the simplex into regions of constant ranking, and an LP
//! mixes those rankings subject to each one staying consistent.

use serde::{Deserialize, Serialize};

use crate::arrangement::{enumerate_cells_with, max_cells, Extra, Hyperplane, DEFAULT_CELL_CAP};
use crate::error::{Error, Result};
use crate::instance::{NEGLIGIBLE_MASS, PRIOR_TOL};
use crate::lp::{solve_lp, LinearProgram, Relation, Sense, FEAS_TOL};

/// Largest number of candidate outcomes the brute-force LP accepts.
pub const MAX_BRUTE_OUTCOMES: usize = 720;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidderType {
    pub q: f64,
    /// `V[i][theta]`, nonnegative.
    #[serde(rename = "V")]
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionInstance {
    pub n: usize,
    pub states: Vec<String>,
    pub prior: Vec<f64>,
    pub types: Vec<BidderType>,
}

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Invalid(format!("{name} is empty")));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Invalid(format!(
            "{name} has a negative or non-finite entry"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PRIOR_TOL {
        return Err(Error::Invalid(format!("{name} sums to {total}")));
    }
    Ok(())
}

impl AuctionInstance {
    pub fn d(&self) -> usize {
        self.prior.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Invalid(format!(
                "a second-price auction needs 2 bidders, got {}",
                self.n
            )));
        }
        if self.states.len() != self.d() {
            return Err(Error::Dimension(format!(
                "{} state names for {} states",
                self.states.len(),
                self.d()
            )));
        }
        check_distribution("prior", &self.prior)?;
        let q: Vec<f64> = self.types.iter().map(|t| t.q).collect();
        check_distribution("type distribution", &q)?;
        for (k, t) in self.types.iter().enumerate() {
            if t.values.len() != self.n || t.values.iter().any(|r| r.len() != self.d()) {
                return Err(Error::Dimension(format!(
                    "type {k} values must be {} x {}",
                    self.n,
                    self.d()
                )));
            }
            if t.values
                .iter()
                .flatten()
                .any(|v| !v.is_finite() || *v < 0.0)
            {
                return Err(Error::Invalid(format!(
                    "type {k} has a negative or non-finite value"
                )));
            }
        }
        Ok(())
    }

    fn expected(&self, t: usize, i: usize, p: &[f64]) -> f64 {
        self.types[t].values[i]
            .iter()
            .zip(p)
            .map(|(v, w)| v * w)
            .sum()
    }

    /// Bidders of type `t` by expected value at `p`, highest first, ties by index.
    pub fn ranking_at(&self, t: usize, p: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| {
            self.expected(t, b, p)
                .total_cmp(&self.expected(t, a, p))
                .then(a.cmp(&b))
        });
        order
    }

    fn second_price(&self, p: &[f64]) -> f64 {
        (0..self.types.len())
            .map(|t| {
                let r = self.ranking_at(t, p);
                self.types[t].q * self.expected(t, r[1], p)
            })
            .sum()
    }

    /// Revenue when the state is revealed.
    pub fn full_information_revenue(&self) -> f64 {
        (0..self.d())
            .map(|th| {
                let mut e = vec![0.0; self.d()];
                e[th] = 1.0;
                self.prior[th] * self.second_price(&e)
            })
            .sum()
    }

    /// Revenue when nothing is revealed.
    pub fn no_information_revenue(&self) -> f64 {
        self.second_price(&self.prior)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonHyperplane {
    pub ty: usize,
    pub i: usize,
    pub j: usize,
    /// `V_t(i, .) - V_t(j, .)`
    pub normal: Vec<f64>,
    /// The two bidders have identical value rows.
    pub degenerate: bool,
}

pub fn comparison_hyperplanes(inst: &AuctionInstance) -> Vec<ComparisonHyperplane> {
    let mut out = Vec::with_capacity(inst.n * (inst.n - 1) / 2 * inst.types.len());
    for (ty, t) in inst.types.iter().enumerate() {
        for i in 0..inst.n {
            for j in i + 1..inst.n {
                let normal: Vec<f64> = t.values[i]
                    .iter()
                    .zip(&t.values[j])
                    .map(|(a, b)| a - b)
                    .collect();
                let degenerate = normal.iter().all(|v| v.abs() <= 1e-12);
                out.push(ComparisonHyperplane {
                    ty,
                    i,
                    j,
                    normal,
                    degenerate,
                });
            }
        }
    }
    out
}

/// One ranking of the bidders per type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Outcome {
    pub rankings: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRegion {
    pub outcome: Outcome,
    /// A posterior strictly inside the region.
    pub witness: Vec<f64>,
}

pub fn enumerate_outcomes(inst: &AuctionInstance) -> Result<Vec<OutcomeRegion>> {
    inst.validate()?;
    let d = inst.d();
    let comps = comparison_hyperplanes(inst);
    if let Some(c) = comps.iter().find(|c| c.degenerate) {
        return Err(Error::Degenerate(format!(
            "bidders {} and {} of type {} have identical values; perturb them",
            c.i + 1,
            c.j + 1,
            c.ty
        )));
    }
    let bound = max_cells(comps.len() as u64, d.saturating_sub(1) as u64);
    if bound > DEFAULT_CELL_CAP {
        return Err(Error::CapExceeded(format!(
            "outcome arrangement may have {bound} regions (cap {DEFAULT_CELL_CAP})"
        )));
    }
    let hps = comps
        .into_iter()
        .map(|c| Hyperplane::through_origin(c.normal))
        .collect::<Result<Vec<_>>>()?;
    let mut extras = vec![Extra::Equality(vec![1.0; d], 1.0)];
    for th in 0..d {
        let mut e = vec![0.0; d];
        e[th] = 1.0;
        extras.push(Extra::Margin(e, 0.0));
    }
    let mut regions: Vec<OutcomeRegion> = Vec::new();
    for cell in enumerate_cells_with(&hps, &extras)? {
        let outcome = Outcome {
            rankings: (0..inst.types.len())
                .map(|t| inst.ranking_at(t, &cell.witness))
                .collect(),
        };
        if regions.iter().all(|r| r.outcome != outcome) {
            regions.push(OutcomeRegion {
                outcome,
                witness: cell.witness,
            });
        }
    }
    Ok(regions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionSolution {
    pub outcomes: Vec<Outcome>,
    /// `probs[theta][o]`
    pub probs: Vec<Vec<f64>>,
    /// Expected revenue of the scheme, always weighted by the type distribution.
    pub revenue: f64,
    /// Optimum of the LP as solved; equals `revenue` unless the literal objective was used.
    pub objective: f64,
    /// Smallest ordering slack over outcomes sent with positive probability.
    pub min_slack: f64,
    pub full_information: f64,
    pub no_information: f64,
}

fn outcome_lp(inst: &AuctionInstance, outcomes: &[Outcome], literal: bool) -> LinearProgram {
    let (d, m) = (inst.d(), outcomes.len());
    let mut obj = vec![0.0; d * m];
    for th in 0..d {
        for (o, out) in outcomes.iter().enumerate() {
            obj[th * m + o] = out
                .rankings
                .iter()
                .enumerate()
                .map(|(t, r)| {
                    let w = if literal { 1.0 } else { inst.types[t].q };
                    w * inst.prior[th] * inst.types[t].values[r[1]][th]
                })
                .sum();
        }
    }
    let mut lp = LinearProgram::new(Sense::Maximize, obj);
    for (o, out) in outcomes.iter().enumerate() {
        for (t, r) in out.rankings.iter().enumerate() {
            let v = &inst.types[t].values;
            for w in r.windows(2) {
                let mut coeffs = vec![0.0; d * m];
                for th in 0..d {
                    coeffs[th * m + o] = inst.prior[th] * (v[w[0]][th] - v[w[1]][th]);
                }
                lp.add_constraint(coeffs, Relation::Ge, 0.0);
            }
        }
    }
    for th in 0..d {
        let mut coeffs = vec![0.0; d * m];
        coeffs[th * m..(th + 1) * m].fill(1.0);
        lp.add_constraint(coeffs, Relation::Eq, 1.0);
    }
    lp
}

/// Smallest `sum_theta lambda phi [V(r_i) - V(r_{i+1})]` over an outcome's rankings.
pub fn ordering_slack(inst: &AuctionInstance, outcome: &Outcome, column: &[f64]) -> f64 {
    outcome
        .rankings
        .iter()
        .enumerate()
        .flat_map(|(t, r)| {
            let v = &inst.types[t].values;
            r.windows(2)
                .map(move |w| {
                    (0..inst.d())
                        .map(|th| inst.prior[th] * column[th] * (v[w[0]][th] - v[w[1]][th]))
                        .sum()
                })
                .collect::<Vec<f64>>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn solve_over(
    inst: &AuctionInstance,
    outcomes: Vec<Outcome>,
    literal: bool,
) -> Result<AuctionSolution> {
    let (d, m) = (inst.d(), outcomes.len());
    let sol =
        solve_lp(&outcome_lp(inst, &outcomes, literal))?.require_optimal("auction outcome LP")?;
    let probs: Vec<Vec<f64>> = (0..d)
        .map(|th| {
            sol.x[th * m..(th + 1) * m]
                .iter()
                .map(|p| p.max(0.0))
                .collect()
        })
        .collect();
    let weighted = outcome_lp(inst, &outcomes, false);
    let revenue = weighted.objective_value(&probs.concat());
    let min_slack = outcomes
        .iter()
        .enumerate()
        .filter(|&(o, _)| (0..d).any(|th| probs[th][o] > NEGLIGIBLE_MASS))
        .map(|(o, out)| {
            let col: Vec<f64> = (0..d).map(|th| probs[th][o]).collect();
            ordering_slack(inst, out, &col)
        })
        .fold(f64::INFINITY, f64::min);
    if min_slack < -FEAS_TOL {
        log::warn!("auction scheme has ordering slack {min_slack}");
    }
    Ok(AuctionSolution {
        outcomes,
        probs,
        revenue,
        objective: sol.objective,
        min_slack,
        full_information: inst.full_information_revenue(),
        no_information: inst.no_information_revenue(),
    })
}

/// Revenue-optimal public scheme over the outcomes realized by some posterior.
/// `literal` drops the type weights from the LP objective.
pub fn solve_auction(inst: &AuctionInstance, literal: bool) -> Result<AuctionSolution> {
    let outcomes = enumerate_outcomes(inst)?
        .into_iter()
        .map(|r| r.outcome)
        .collect();
    solve_over(inst, outcomes, literal)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// The same LP over every combination of rankings.
pub fn brute_force_auction(inst: &AuctionInstance) -> Result<AuctionSolution> {
    inst.validate()?;
    let perms = permutations(inst.n);
    let total = (0..inst.types.len()).try_fold(1usize, |acc, _| acc.checked_mul(perms.len()));
    match total {
        Some(c) if c <= MAX_BRUTE_OUTCOMES => {}
        _ => {
            return Err(Error::CapExceeded(format!(
                "({}!)^{} outcomes exceed {MAX_BRUTE_OUTCOMES}",
                inst.n,
                inst.types.len()
            )))
        }
    }
    let mut outcomes = vec![Outcome {
        rankings: Vec::new(),
    }];
    for _ in 0..inst.types.len() {
        outcomes = outcomes
            .into_iter()
            .flat_map(|o| {
                perms.iter().map(move |p| {
                    let mut r = o.rankings.clone();
                    r.push(p.clone());
                    Outcome { rankings: r }
                })
            })
            .collect();
    }
    solve_over(inst, outcomes, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(prior: Vec<f64>, values: Vec<Vec<f64>>) -> AuctionInstance {
        AuctionInstance {
            n: values.len(),
            states: (0..prior.len()).map(|t| format!("t{t}")).collect(),
            prior,
            types: vec![BidderType { q: 1.0, values }],
        }
    }

    fn hand() -> AuctionInstance {
        single(vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]])
    }

    #[test]
    fn hyperplane_counts() {
        assert_eq!(comparison_hyperplanes(&hand()).len(), 1);
        let mut inst = single(
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.3, 0.4]],
        );
        inst.types = vec![
            BidderType {
                q: 0.5,
                values: inst.types[0].values.clone(),
            };
            2
        ];
        assert_eq!(comparison_hyperplanes(&inst).len(), 6);
        let dup = single(vec![1.0], vec![vec![1.0], vec![1.0]]);
        assert!(comparison_hyperplanes(&dup)[0].degenerate);
        assert!(matches!(
            enumerate_outcomes(&dup),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn hand_instance() {
        let regions = enumerate_outcomes(&hand()).unwrap();
        assert_eq!(regions.len(), 2);
        let sol = solve_auction(&hand(), false).unwrap();
        assert!((sol.revenue - 0.5).abs() < 1e-9);
        assert!(sol.full_information.abs() < 1e-12);
        assert!((sol.no_information - 0.5).abs() < 1e-12);
        let brute = brute_force_auction(&hand()).unwrap();
        assert!((brute.revenue - 0.5).abs() < 1e-9);
    }

    #[test]
    fn one_state_is_second_price() {
        let inst = single(vec![1.0], vec![vec![3.0], vec![1.0]]);
        assert_eq!(enumerate_outcomes(&inst).unwrap().len(), 1);
        assert!((solve_auction(&inst, false).unwrap().revenue - 1.0).abs() < 1e-9);
        assert!((brute_force_auction(&inst).unwrap().revenue - 1.0).abs() < 1e-9);
    }

    #[test]
    fn permutation_count() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        let mut s = p.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 6);
    }
}
