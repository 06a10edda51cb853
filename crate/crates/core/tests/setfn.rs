mod common;

use persuade_core::generate::{
    random_coverage, random_cut, random_explicit, random_submodular_table, rng,
};
use persuade_core::lp::{solve_lp, LinearProgram, Relation, Sense};
use persuade_core::profile::ActionProfile;
use persuade_core::setfn::{
    alpha_subroutine, check_structure, lovasz_chain_value, maximize_minus_linear,
    CompletionStrategy, SetFunction, SetFunctionSpec,
};
use proptest::prelude::*;
use rand::Rng;

fn exhaustive_minus_linear(f: &SetFunctionSpec, w: &[f64]) -> f64 {
    (0..1u64 << f.n())
        .map(|m| {
            f.eval_mask(m)
                - (0..f.n())
                    .filter(|&i| m >> i & 1 == 1)
                    .map(|i| w[i])
                    .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn check_minus_linear(f: &SetFunctionSpec, w: &[f64]) {
    let (s, v) = maximize_minus_linear(f, w).unwrap();
    let cost: f64 = s.members().map(|i| w[i]).sum();
    assert!(
        (f.eval_mask(s.mask()) - cost - v).abs() < 1e-9,
        "reported value is not attained"
    );
    let best = exhaustive_minus_linear(f, w);
    assert!((v - best).abs() < 1e-9, "{} {v} vs {best}", f.kind_name());
}

#[test]
fn minus_linear_agrees_with_exhaustive_search() {
    for seed in 0..200u64 {
        let mut r = rng(seed);
        let n = r.gen_range(1..=12usize);
        let w: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..2.0)).collect();
        let additive = SetFunctionSpec::additive((0..n).map(|_| r.gen::<f64>() * 2.0).collect());
        let anonymous =
            SetFunctionSpec::anonymous((0..=n).map(|_| r.gen::<f64>() * n as f64).collect());
        check_minus_linear(&additive, &w);
        check_minus_linear(&anonymous, &w);
        check_minus_linear(&random_coverage(n, &mut r), &w);
        check_minus_linear(&random_cut(n, &mut r), &w);
        if n <= 10 {
            check_minus_linear(&random_explicit(n, &mut r), &w);
        }
    }
}

#[test]
fn minus_linear_examples() {
    let (s, v) = maximize_minus_linear(
        &SetFunctionSpec::additive(vec![1.0, 2.0, 3.0]),
        &[2.0, 2.0, 2.0],
    )
    .unwrap();
    assert_eq!(s, ActionProfile::from_bits(&[0, 0, 1]).unwrap());
    assert!((v - 1.0).abs() < 1e-12);
    let (s, v) = maximize_minus_linear(
        &SetFunctionSpec::anonymous(vec![0.0, 1.0, 4.0]),
        &[1.0, 1.0],
    )
    .unwrap();
    assert_eq!(s, ActionProfile::full(2).unwrap());
    assert!((v - 2.0).abs() < 1e-12);
    let linear = SetFunctionSpec::explicit(vec![0.0, 1.0, 1.0, 2.0, 1.0, 2.0, 2.0, 3.0]);
    let (s, v) = maximize_minus_linear(&linear, &[0.5, 1.5, 0.5]).unwrap();
    assert_eq!(s, ActionProfile::from_bits(&[1, 0, 1]).unwrap());
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn completion_respects_alpha() {
    for seed in 0..60u64 {
        let mut r = rng(1000 + seed);
        let n = r.gen_range(1..=10usize);
        let fixed = ActionProfile::from_mask(n, r.gen::<u64>() & ((1 << n) - 1)).unwrap();
        let free: Vec<usize> = (0..n).filter(|_| r.gen_bool(0.6)).collect();
        let free_mask = free.iter().fold(0u64, |m, &i| m | 1 << i);
        let base = fixed.mask() & !free_mask;
        for spec in [
            random_coverage(n, &mut r),
            random_cut(n, &mut r),
            random_explicit(n, &mut r),
        ] {
            let f = SetFunction::new(spec.clone()).unwrap();
            let c = alpha_subroutine(&f, &fixed, &free).unwrap();
            assert_eq!(
                c.profile.mask() & !free_mask,
                base,
                "completion touched fixed receivers"
            );
            let best = (0..1u64 << n)
                .filter(|&m| m & !free_mask == base)
                .map(|m| spec.eval_mask(m))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                c.value >= c.alpha * best - 1e-9,
                "{:?}: {} < {} * {best}",
                c.strategy,
                c.value,
                c.alpha
            );
        }
    }
}

#[test]
fn completion_examples() {
    let cov = SetFunction::new(SetFunctionSpec::coverage(
        vec![1.0, 1.0, 1.0],
        vec![vec![0], vec![1], vec![1, 2]],
    ))
    .unwrap();
    let c = alpha_subroutine(&cov, &ActionProfile::empty(3).unwrap(), &[1, 2]).unwrap();
    assert_eq!(c.strategy, CompletionStrategy::AllOnes);
    assert!(c.profile.contains(1) && c.profile.contains(2) && !c.profile.contains(0));

    let tri = SetFunction::new(SetFunctionSpec::cut(
        3,
        vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)],
    ))
    .unwrap();
    let c = alpha_subroutine(&tri, &ActionProfile::empty(3).unwrap(), &[0, 1, 2]).unwrap();
    assert_eq!(c.strategy, CompletionStrategy::DoubleGreedy);
    assert!(c.value >= 1.0);

    let table = SetFunction::new(SetFunctionSpec::explicit(vec![
        0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ]))
    .unwrap();
    let c = alpha_subroutine(&table, &ActionProfile::from_bits(&[0, 1, 0]).unwrap(), &[0]).unwrap();
    assert_eq!(c.strategy, CompletionStrategy::Exhaustive);
    assert_eq!(c.profile, ActionProfile::from_bits(&[0, 1, 0]).unwrap());
}

#[test]
fn structure_examples() {
    let card: Vec<f64> = (0..8u32).map(|m| m.count_ones() as f64).collect();
    let st = check_structure(&card).unwrap();
    assert!(st.monotone && st.submodular && st.supermodular);

    let mut ind = vec![0.0; 8];
    ind[7] = 1.0;
    let st = check_structure(&ind).unwrap();
    assert!(st.supermodular && st.monotone && !st.submodular);

    let tri = SetFunctionSpec::cut(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
        .table()
        .unwrap();
    let st = check_structure(&tri).unwrap();
    assert!(st.submodular && !st.monotone);
}

#[test]
fn structure_matches_lattice_definition() {
    for seed in 0..100u64 {
        let mut r = rng(2000 + seed);
        let n = r.gen_range(1..=5usize);
        let t = match seed % 3 {
            0 => random_explicit(n, &mut r).table().unwrap(),
            1 => random_submodular_table(n, &mut r).table().unwrap(),
            _ => random_coverage(n, &mut r).table().unwrap(),
        };
        let st = check_structure(&t).unwrap();
        assert_eq!(st.submodular, common::is_submodular(&t));
        assert_eq!(st.monotone, common::is_monotone(&t));
        let neg: Vec<f64> = t.iter().map(|v| -v).collect();
        assert_eq!(check_structure(&neg).unwrap().supermodular, st.submodular);
        assert_eq!(check_structure(&neg).unwrap().submodular, st.supermodular);
    }
}

#[test]
fn false_flags_are_rejected() {
    let tri = SetFunctionSpec::cut(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
        .table()
        .unwrap();
    let spec = SetFunctionSpec::explicit(tri).with_flags(persuade_core::setfn::Flags {
        monotone: Some(true),
        ..Default::default()
    });
    assert!(SetFunction::new(spec).is_err());
}

fn distribution_min(f: &SetFunctionSpec, x: &[f64]) -> LinearProgram {
    let n = f.n();
    let mut lp = LinearProgram::new(Sense::Minimize, f.table().unwrap());
    for (i, &xi) in x.iter().enumerate() {
        lp.add_constraint(
            (0..1u64 << n).map(|m| (m >> i & 1) as f64).collect(),
            Relation::Eq,
            xi,
        );
    }
    lp.add_constraint(vec![1.0; 1 << n], Relation::Eq, 1.0);
    lp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(80))]

    #[test]
    fn chain_value_is_distribution_minimum(seed in 0u64..10_000, n in 1usize..=8) {
        let mut r = rng(seed);
        let f = random_submodular_table(n, &mut r);
        let x: Vec<f64> = (0..n).map(|_| r.gen::<f64>()).collect();
        let (chain, v) = lovasz_chain_value(&f, &x).unwrap();
        for (i, xi) in x.iter().enumerate() {
            prop_assert!((chain.marginal(i) - xi).abs() < 1e-12);
        }
        prop_assert!((chain.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let lp = distribution_min(&f, &x);
        let opt = solve_lp(&lp).unwrap().objective;
        prop_assert!((v - opt).abs() < 1e-6, "chain {} vs LP {}", v, opt);
        if n <= 2 {
            let vo = common::vertex_optimum(&lp).unwrap();
            prop_assert!((v - vo).abs() < 1e-6);
        }
    }
}

#[test]
fn chain_examples() {
    let f = SetFunctionSpec::cardinality(2);
    let (c, v) = lovasz_chain_value(&f, &[0.8, 0.3]).unwrap();
    assert!((v - 1.1).abs() < 1e-12);
    let p = |bits: &[u8]| {
        let s = ActionProfile::from_bits(bits).unwrap();
        c.sets
            .iter()
            .zip(&c.probs)
            .filter(|(t, _)| **t == s)
            .map(|(_, p)| p)
            .sum::<f64>()
    };
    assert!((p(&[1, 0]) - 0.5).abs() < 1e-12);
    assert!((p(&[1, 1]) - 0.3).abs() < 1e-12);
    assert!((p(&[0, 0]) - 0.2).abs() < 1e-12);

    let (_, v) = lovasz_chain_value(&SetFunctionSpec::cardinality(3), &[1.0; 3]).unwrap();
    assert_eq!(v, 3.0);
}
