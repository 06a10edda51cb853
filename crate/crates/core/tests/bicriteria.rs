use persuade_core::bicriteria::{solve_bicriteria, BicriteriaSolution, DEFAULT_GRID_CAP};
use persuade_core::exact::solve_persuasive_exact;
use persuade_core::generate::{random_coverage, random_cut, rng, shared_instance};
use persuade_core::instance::{verify_scheme, Mode, PersuasionInstance};
use rand::Rng;

fn check_assembly(inst: &PersuasionInstance, sol: &BicriteriaSolution, eps: f64) {
    let d = inst.d();
    for t in 0..d {
        let row: f64 = sol.grid_probs[t].iter().sum();
        assert!((row - 1.0).abs() < 1e-7, "row {t} sums to {row}");
    }
    for (j, g) in sol.grid_signals.iter().enumerate() {
        let joint: Vec<f64> = (0..d)
            .map(|t| inst.prior[t] * sol.grid_probs[t][j])
            .collect();
        let mass: f64 = joint.iter().sum();
        assert!((mass - g.weight).abs() < 1e-9);
        for (jt, pt) in joint.iter().zip(&g.point) {
            assert!(
                (jt / mass - pt).abs() < 1e-7,
                "posterior differs from its grid point"
            );
        }
        for i in 0..inst.n {
            let v: f64 = (0..d).map(|t| g.point[t] * inst.payoff[i][t]).sum();
            if g.profile.contains(i) {
                assert!(v >= -eps - 1e-9);
            } else {
                assert!(v <= eps + 1e-9);
            }
        }
    }
}

#[test]
fn coverage_guarantee_and_assembly() {
    for seed in 0..10u64 {
        let mut r = rng(300 + seed);
        let n = r.gen_range(2..=6);
        let inst = shared_instance(random_coverage(n, &mut r), 2, &mut r);
        for eps in [0.3, 0.5] {
            let sol = solve_bicriteria(&inst, eps, eps, DEFAULT_GRID_CAP).unwrap();
            check_assembly(&inst, &sol, eps);
            assert_eq!((sol.alpha, sol.beta), (1.0, 1.0));
            let scheme = sol.to_public_scheme().unwrap();
            let rep = verify_scheme(&inst, &scheme, Mode::Eps(eps)).unwrap();
            assert!(rep.passed);
            assert!((rep.sender_value - sol.value).abs() < 1e-7);
            let opt = solve_persuasive_exact(&inst, Mode::Exact).unwrap().value;
            assert!(
                sol.value >= (1.0 - eps) * opt - 1e-6,
                "seed {seed}: {} < (1-{eps}) {opt}",
                sol.value
            );
        }
    }
}

#[test]
fn cut_guarantee() {
    for seed in 0..10u64 {
        let mut r = rng(400 + seed);
        let n = r.gen_range(2..=6);
        let inst = shared_instance(random_cut(n, &mut r), 2, &mut r);
        let eps = 0.4;
        let sol = solve_bicriteria(&inst, eps, eps, DEFAULT_GRID_CAP).unwrap();
        check_assembly(&inst, &sol, eps);
        assert!(
            verify_scheme(&inst, &sol.to_public_scheme().unwrap(), Mode::Eps(eps))
                .unwrap()
                .passed
        );
        let opt = solve_persuasive_exact(&inst, Mode::Exact).unwrap().value;
        assert!(sol.value >= 0.5 * (1.0 - 2.0 * eps) * opt - 1e-6);
    }
}

#[test]
fn value_grows_with_eps() {
    for seed in 0..10u64 {
        let mut r = rng(500 + seed);
        let n = r.gen_range(2..=5);
        let inst = shared_instance(random_coverage(n, &mut r), 2, &mut r);
        let vals: Vec<f64> = [0.2, 0.3, 0.4, 0.5, 0.7]
            .iter()
            .map(|&e| {
                solve_bicriteria(&inst, e, e, DEFAULT_GRID_CAP)
                    .unwrap()
                    .value
            })
            .collect();
        assert!(
            vals.windows(2).all(|w| w[1] >= w[0] - 1e-7),
            "seed {seed}: {vals:?}"
        );
    }
}

#[test]
fn per_state_objective_rejected() {
    let inst = persuade_core::generate::random_uniform_instance(3, 2, &mut rng(1));
    assert!(solve_bicriteria(&inst, 0.3, 0.3, DEFAULT_GRID_CAP).is_err());
}
