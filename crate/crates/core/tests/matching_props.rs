use proptest::prelude::*;
use psapprox::matching::{naive_baseline, objective, optimize_with, MatchingProblem, Objective};

fn reduced() -> MatchingProblem {
    MatchingProblem {
        phibar_knots: 5,
        gamma_nodes: 16,
        horizon: 2.0,
        ..MatchingProblem::reference()
    }
}

#[test]
fn objective_is_stable_under_small_steps() {
    let p = MatchingProblem::reference();
    let q = Objective::new(&p).unwrap();
    let base = naive_baseline(&p).unwrap();
    let mut theta = base.clone();
    theta[8] = 0.3;
    let f0 = q.eval(&theta).unwrap();
    for k in 0..theta.len() {
        let mut t = theta.clone();
        t[k] += 1e-6;
        let f = q.eval(&t).unwrap();
        assert!((f - f0).abs() < 1e-3 * f0, "parameter {k}: {f} vs {f0}");
    }
}

#[test]
fn regularisation_adds_signal_energy() {
    let mut p = reduced();
    let theta = naive_baseline(&p).unwrap();
    let plain = objective(&p, &theta).unwrap();
    p.lambda = 0.5;
    let reg = objective(&p, &theta).unwrap();
    // φ̄ ≡ 1 on [0, 2].
    assert!((reg - plain - 0.5 * 2.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn traces_are_monotone_feasible_and_reproducible(seed in any::<u64>()) {
        let p = reduced();
        let q = Objective::new(&p).unwrap();
        let a = optimize_with(&q, 60, seed).unwrap();
        let b = optimize_with(&q, 60, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.best_so_far.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(a.best_objective <= a.baseline_objective);
        for it in &a.iterates {
            prop_assert!(it.params.iter().all(|v| *v >= 0.0));
            prop_assert!(it.objective >= 0.0);
        }
    }

    #[test]
    fn objective_is_nonnegative(values in prop::collection::vec(0.0f64..3.0, 6)) {
        let q = Objective::new(&reduced()).unwrap();
        prop_assert!(q.eval(&values).unwrap() >= 0.0);
    }
}
