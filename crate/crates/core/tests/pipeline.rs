use proptest::prelude::*;
use psapprox::estimates::energy_identity_residual;
use psapprox::experiment::Experiment;
use psapprox::exterior::{export, BoundaryFlux, ExteriorGrid};
use psapprox::geometry::BoundaryCurve;
use psapprox::pointsource::{GaussianMixture, TimeSignal};

fn small(mut e: Experiment) -> Experiment {
    e.grid.n_r = 41;
    e.grid.n_theta = 16;
    e.grid.n_steps = 80;
    e.grid.stamp_every = 8;
    e
}

#[test]
fn quiet_experiment_stays_zero() {
    let mut e = small(Experiment::reference());
    e.flux = BoundaryFlux::zero();
    e.phibar = TimeSignal::zero();
    let (grid, traj) = e.simulate().unwrap();
    assert!(traj.fields.iter().flatten().all(|v| *v == 0.0));
    let terms = energy_identity_residual(&traj, &e.point_model().unwrap(), &e.flux, &grid).unwrap();
    assert!(terms.iter().all(|t| t.residual == 0.0));
}

#[test]
fn reference_report_on_a_coarse_grid() {
    let e = small(Experiment::reference());
    let (_, _, r) = e.compare().unwrap();
    assert!(r.c_star_monotone && r.bound_dominates);
    assert!(r.c_gamma > 0.0 && r.c_gamma.is_finite());
    assert!(r.theorem.l2_margins.iter().chain(&r.theorem.h1_margins).flatten().all(|m| m.is_finite()));
    assert_eq!(r.theorem.epsilon_grid, vec![0.5, 1.0, 1.5]);
}

#[test]
fn ellipse_experiment_runs() {
    let mut e = small(Experiment::reference());
    e.curve = BoundaryCurve::ellipse(1.5, 1.0).unwrap();
    e.u0 = GaussianMixture::single(0.3, [0.0, 0.0], 0.05).unwrap();
    let (_, traj, r) = e.compare().unwrap();
    assert_eq!(traj.len(), 11);
    assert!(r.c_star_monotone && r.bound_dominates);
}

#[test]
fn trajectories_round_trip_through_files() {
    let e = small(Experiment::reference());
    let (grid, traj) = e.simulate().unwrap();
    let dir = tempfile::tempdir().unwrap();
    export::write_trajectory(&traj, &grid, dir.path(), "full").unwrap();
    let (g2, t2) = export::read_trajectory(dir.path(), "full").unwrap();
    assert_eq!(g2.n_nodes(), grid.n_nodes());
    assert_eq!(t2.fields, traj.fields);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn grid_weights_sum_to_area(a in 0.8f64..2.0, b in 0.8f64..2.0, nr in 20usize..60, nt in 16usize..64) {
        let curve = BoundaryCurve::ellipse(a, b).unwrap();
        let grid = ExteriorGrid::with_default_radius(curve, nr, nt).unwrap();
        let sum: f64 = grid.weights().iter().sum();
        let exact = std::f64::consts::PI * (grid.r_inf().powi(2) - a * b);
        // Trapezoid in s, spectral in θ.
        prop_assert!((sum - exact).abs() < 5e-3 * exact, "{} vs {}", sum, exact);
        prop_assert!(grid.weights().iter().all(|w| *w > 0.0));
    }

    #[test]
    fn solver_preserves_sign(w in 0.1f64..2.0, x in 3.0f64..6.0, s in 0.1f64..1.0) {
        let mut e = small(Experiment::reference());
        e.flux = BoundaryFlux::constant(0.05);
        e.u0 = GaussianMixture::single(w, [x, 0.0], s).unwrap();
        let (_, traj) = e.simulate().unwrap();
        let min = traj.fields.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min > -1e-6 * w);
    }
}
