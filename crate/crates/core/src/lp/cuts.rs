use super::{solve_lp, LinearProgram, LpSolution, LpStatus, Relation, FEAS_TOL};
use crate::error::Result;

/// A constraint proposed by a separation oracle, with the amount by which the
/// queried point violates it and a caller-defined provenance tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut<T> {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
    pub violation: f64,
    pub tag: T,
}

pub trait SeparationOracle {
    type Tag: Clone;

    /// Constraints violated by `x`; empty when `x` is feasible for the full family.
    fn separate(&self, x: &[f64]) -> Result<Vec<Cut<Self::Tag>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutStatus {
    Converged,
    RoundLimit,
    Lp(LpStatus),
}

#[derive(Debug, Clone)]
pub struct CutOutcome<T> {
    pub status: CutStatus,
    pub solution: LpSolution,
    /// Final LP including every accepted cut.
    pub lp: LinearProgram,
    pub cuts: Vec<Cut<T>>,
    pub rounds: usize,
    pub objective_history: Vec<f64>,
    /// Cuts accepted after each round; `cuts` is their concatenation.
    pub round_sizes: Vec<usize>,
}

pub fn default_max_rounds(num_vars: usize) -> usize {
    10 * (num_vars + 100)
}

/// Solve, separate, append, repeat. Cuts are never removed, so for a
/// minimization the relaxation optimum is nondecreasing across rounds.
pub fn solve_with_cuts<O: SeparationOracle>(
    base: &LinearProgram,
    oracle: &O,
    max_rounds: usize,
) -> Result<CutOutcome<O::Tag>> {
    let mut lp = base.clone();
    let mut cuts: Vec<Cut<O::Tag>> = Vec::new();
    let mut history = Vec::new();
    let mut round_sizes = Vec::new();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let solution = solve_lp(&lp)?;
        if !solution.is_optimal() {
            return Ok(CutOutcome {
                status: CutStatus::Lp(solution.status),
                solution,
                lp,
                cuts,
                rounds,
                objective_history: history,
                round_sizes,
            });
        }
        history.push(solution.objective);
        let fresh: Vec<Cut<O::Tag>> = oracle
            .separate(&solution.x)?
            .into_iter()
            .filter(|c| {
                let lhs = super::dot(&c.coeffs, &solution.x);
                c.relation.violation(lhs, c.rhs) > FEAS_TOL
            })
            .collect();
        if fresh.is_empty() || rounds >= max_rounds {
            let status = if fresh.is_empty() {
                CutStatus::Converged
            } else {
                CutStatus::RoundLimit
            };
            return Ok(CutOutcome {
                status,
                solution,
                lp,
                cuts,
                rounds,
                objective_history: history,
                round_sizes,
            });
        }
        round_sizes.push(fresh.len());
        for cut in fresh {
            lp.add_constraint(cut.coeffs.clone(), cut.relation, cut.rhs);
            cuts.push(cut);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Sense;

    struct Reveal(Vec<f64>);

    impl SeparationOracle for Reveal {
        type Tag = usize;
        fn separate(&self, x: &[f64]) -> Result<Vec<Cut<usize>>> {
            // one most-violated lower bound v >= c per call
            let worst = self
                .0
                .iter()
                .enumerate()
                .filter(|(_, &c)| x[0] < c - FEAS_TOL)
                .max_by(|a, b| a.1.total_cmp(b.1));
            Ok(worst
                .map(|(k, &c)| Cut {
                    coeffs: vec![1.0],
                    relation: Relation::Ge,
                    rhs: c,
                    violation: c - x[0],
                    tag: k,
                })
                .into_iter()
                .collect())
        }
    }

    struct AlwaysFeasible;

    impl SeparationOracle for AlwaysFeasible {
        type Tag = ();
        fn separate(&self, _: &[f64]) -> Result<Vec<Cut<()>>> {
            Ok(Vec::new())
        }
    }

    #[test]
    fn scalar_covering_converges() {
        let lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        let out = solve_with_cuts(&lp, &Reveal(vec![1.0, 5.0, 2.0]), 50).unwrap();
        assert_eq!(out.status, CutStatus::Converged);
        assert!((out.solution.x[0] - 5.0).abs() < 1e-12);
        assert!(out.rounds <= 3);
        assert!(out
            .objective_history
            .windows(2)
            .all(|w| w[0] <= w[1] + 1e-12));
    }

    #[test]
    fn feasible_oracle_takes_one_round() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 2.0);
        let out = solve_with_cuts(&lp, &AlwaysFeasible, 10).unwrap();
        assert_eq!(out.rounds, 1);
        assert!(out.cuts.is_empty());
        assert!((out.solution.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn round_limit_is_reported() {
        let lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        let out = solve_with_cuts(&lp, &Reveal(vec![1.0, 2.0, 3.0]), 1).unwrap();
        assert_eq!(out.status, CutStatus::RoundLimit);
    }
}
