//! Diagnostics against independent oracles: the energy coercivity structure,
//! the sign structure of the dissipation terms, the decoupled minimum
//! principle, and the ensemble-level measured examples.

mod common;

use chks::attractor::{self, EnsembleSpec, StepperKind};
use chks::diagnostics;
use chks::grid::{self, Field, Grid};
use chks::potential::{CoeffSpec, PotentialSpec};
use chks::spectral::SpectralPlan;
use chks::stepper::{self, ModelParams, State};
use common::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[test]
fn energy_coercivity_fitted_on_half_holds_on_holdout() {
    // E >= kappa (||sigma ln(1+sigma)||_L1 + ||phi||_V^2 + ||beta_hat(phi)||_L1) - c
    // with (kappa, c) fitted once on half the sample set.
    let grid = Grid::new(16, 16, 2.0, 2.0).unwrap();
    let params = ModelParams::new(
        0.5,
        PotentialSpec::flory_huggins(1.0),
        CoeffSpec::Constant(1.0),
        CoeffSpec::Constant(0.4),
        0.01,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut samples = Vec::new();
    for _ in 0..1000 {
        let phi = Field::new(
            grid,
            (0..grid.len())
                .map(|_| rng.gen_range(-0.98..0.98))
                .collect(),
        )
        .unwrap();
        let sigma = Field::new(
            grid,
            (0..grid.len()).map(|_| rng.gen_range(0.0..4.0)).collect(),
        )
        .unwrap();
        let state = State::new(phi, sigma, 0.0).unwrap();
        let e = diagnostics::energy(&state, &params).unwrap();
        let coercive = grid::integrate(&state.sigma, |s| s * (1.0 + s).ln())
            + grid::l2_norm(&state.phi).powi(2)
            + grid::grad_norm_sq(&state.phi)
            + grid::integrate(&state.phi, |p| params.potential.beta_hat(p).unwrap());
        samples.push((e, coercive));
    }
    let (fit_set, holdout) = samples.split_at(500);
    let c0 = 1.0 + 2.0 * fit_set.iter().map(|&(e, _)| -e).fold(0.0f64, f64::max);
    let kappa = 0.9
        * fit_set
            .iter()
            .map(|&(e, x)| (e + c0) / x.max(1e-12))
            .fold(f64::INFINITY, f64::min);
    assert!(kappa > 0.0, "fitted kappa must be positive, got {kappa}");
    for &(e, x) in holdout {
        assert!(
            e >= kappa * x - c0,
            "coercivity violated on holdout: E = {e}, bracket = {x}, kappa = {kappa}, c = {c0}"
        );
    }
}

#[test]
fn dissipation_terms_are_nonnegative_for_chi_zero_and_matched_logistic() {
    // with chi = 0 and h = k the three non-dE/dt terms are pointwise-sign
    // definite: sigma (h sigma - k)(ln sigma) >= 0 since the logistic fixed
    // point sits at sigma = 1
    let grid = Grid::new(32, 32, 8.0, 8.0).unwrap();
    let plan = SpectralPlan::new(grid);
    let p = ModelParams::new(
        0.0,
        PotentialSpec::flory_huggins(1.0),
        CoeffSpec::Constant(1.0),
        CoeffSpec::Constant(1.0),
        0.01,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let mut state = random_state(grid, &mut rng, 0.1, 0.7, 0.4);
    for _ in 0..50 {
        let out = stepper::step(&plan, &state, &p).unwrap();
        let rep = diagnostics::dissipation_residual(&state, &out.state, &out.mu, p.dt, &p).unwrap();
        assert!(rep.grad_mu_sq >= -1e-12);
        assert!(rep.entropy_dissipation >= -1e-12);
        assert!(
            rep.logistic_term >= -1e-12,
            "logistic term {}",
            rep.logistic_term
        );
        assert_eq!(rep.excluded_cells, 0);
        state = out.state;
    }
}

#[test]
fn dissipation_residual_refines_at_first_order() {
    let grid = Grid::new(16, 16, 4.0, 4.0).unwrap();
    let plan = SpectralPlan::new(grid);
    let smooth = || {
        State::new(
            Field::from_fn(grid, |x, _| {
                0.1 + 0.2 * (std::f64::consts::PI * x / 4.0).cos()
            }),
            Field::from_fn(grid, |_, y| {
                1.0 + 0.2 * (std::f64::consts::PI * y / 4.0).cos()
            }),
            0.0,
        )
        .unwrap()
    };
    let run = |dt: f64| -> f64 {
        let p = ModelParams::new(
            0.3,
            PotentialSpec::flory_huggins(1.0),
            CoeffSpec::Constant(1.0),
            CoeffSpec::Constant(1.0),
            dt,
        )
        .unwrap();
        let mut s = smooth();
        let mut acc = 0.0;
        for _ in 0..(0.5 / dt).round() as usize {
            let out = stepper::step(&plan, &s, &p).unwrap();
            acc += diagnostics::dissipation_residual(&s, &out.state, &out.mu, dt, &p)
                .unwrap()
                .residual
                .abs()
                * dt;
            s = out.state;
        }
        acc
    };
    let ratio = run(0.02) / run(0.01);
    assert!((1.5..=2.5).contains(&ratio), "refinement ratio {ratio}");
}

#[test]
fn min_principle_on_decoupled_logistic_run() {
    // sigma_0 = 0.1 uniform, h = k = 1, chi = 0: sigma rises monotonically
    // toward 1, so delta >= 0.1; cross-check the floor with the exact
    // logistic solution
    let grid = Grid::new(16, 16, 1.0, 1.0).unwrap();
    let plan = SpectralPlan::new(grid);
    let p = ModelParams::new(
        0.0,
        PotentialSpec::flory_huggins(0.0),
        CoeffSpec::Constant(1.0),
        CoeffSpec::Constant(1.0),
        0.02,
    )
    .unwrap();
    let initial = State::new(Field::constant(grid, 0.0), Field::constant(grid, 0.1), 0.0).unwrap();
    let traj = attractor::run_trajectory(&plan, initial, &p, 5.0, 10, StepperKind::Standard);
    assert!(traj.failure.is_none());
    let rep = diagnostics::min_principle_report(&traj.snapshots, 0.0, 5.0).unwrap();
    assert!(rep.delta >= 0.1, "delta = {}", rep.delta);
    let exact_floor = logistic_exact(0.1, 1.0, 1.0, 0.0);
    assert!(rep.delta >= exact_floor - 1e-12);
    // v_- decays as sigma climbs toward 1
    let first = rep.v_neg_l1.first().unwrap().1;
    let last = rep.v_neg_l1.last().unwrap().1;
    assert!(last < first);
}

#[test]
fn identical_initial_data_give_zero_contraction_metric_at_all_times() {
    let grid = Grid::new(16, 16, 4.0, 4.0).unwrap();
    let plan = SpectralPlan::new(grid);
    let p = ModelParams::new(
        0.4,
        PotentialSpec::flory_huggins(1.5),
        CoeffSpec::Constant(1.0),
        CoeffSpec::Constant(0.6),
        0.01,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let initial = random_state(grid, &mut rng, 0.0, 0.7, 0.2);
    let a = attractor::run_trajectory(&plan, initial.clone(), &p, 0.5, 5, StepperKind::Standard);
    let b = attractor::run_trajectory(&plan, initial, &p, 0.5, 5, StepperKind::Standard);
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let m = diagnostics::contraction_metric(&plan, sa, sb, 1.0).unwrap();
        assert_eq!(m, 0.0);
    }
}

#[test]
fn decoupled_ensemble_matches_per_sample_runs_and_energy_trend() {
    let grid = Grid::new(16, 16, 8.0, 8.0).unwrap();
    let plan = SpectralPlan::new(grid);
    let p = ModelParams::new(
        0.0,
        PotentialSpec::flory_huggins(1.0),
        CoeffSpec::Constant(1.0),
        CoeffSpec::Constant(0.05),
        0.02,
    )
    .unwrap();
    let spec = EnsembleSpec {
        n_samples: 3,
        radius: 6.0,
        mean_phi: 0.1,
        seed: 64,
        horizon: 3.0,
        stride: 10,
        sigma_floor: 0.2,
    };
    let trajs = attractor::run_ensemble(&plan, &p, &spec, StepperKind::Standard, 2).unwrap();
    let initials = attractor::sample_initial_ball(&plan, &p.potential, &spec).unwrap();
    for (traj, init) in trajs.iter().zip(initials) {
        assert!(traj.failure.is_none());
        let solo = attractor::run_trajectory(&plan, init, &p, 3.0, 10, StepperKind::Standard);
        assert_eq!(
            traj.snapshots.last().unwrap().sigma.values(),
            solo.snapshots.last().unwrap().sigma.values()
        );
        assert_eq!(
            traj.snapshots.last().unwrap().phi.values(),
            solo.snapshots.last().unwrap().phi.values()
        );
    }
}

#[test]
fn decoupled_energy_series_has_monotone_trend() {
    // chi = 0 with sigma started at the logistic equilibrium k/h: the sigma
    // terms stay quiet and the series follows the Cahn-Hilliard gradient
    // flow downhill
    let grid = Grid::new(16, 16, 8.0, 8.0).unwrap();
    let plan = SpectralPlan::new(grid);
    let k_small = 0.05;
    let p = ModelParams::new(
        0.0,
        PotentialSpec::flory_huggins(1.0),
        CoeffSpec::Constant(1.0),
        CoeffSpec::Constant(k_small),
        0.02,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(68);
    let mut initial = random_state(grid, &mut rng, 0.1, 0.7, 1.0);
    initial.sigma = Field::constant(grid, k_small / 1.0);
    let traj = attractor::run_trajectory(&plan, initial, &p, 3.0, 10, StepperKind::Standard);
    assert!(traj.failure.is_none());
    let energies: Vec<f64> = traj.reports.iter().map(|r| r.energy).collect();
    let start = energies.len() / 10;
    for w in energies[start..].windows(2) {
        assert!(
            w[1] <= w[0] + 1e-9,
            "energy rose late in the run: {} -> {}",
            w[0],
            w[1]
        );
    }
    assert!(energies[energies.len() - 1] < energies[0]);
}

#[test]
fn absorbing_entry_time_is_monotone_in_ball_radius_on_matched_seeds() {
    let grid = Grid::new(16, 16, 8.0, 8.0).unwrap();
    let plan = SpectralPlan::new(grid);
    let p = ModelParams::new(
        0.4,
        PotentialSpec::flory_huggins(1.0),
        CoeffSpec::Saturating {
            lo: 0.6,
            hi: 1.4,
            scale: 1.0,
        },
        CoeffSpec::Constant(0.4),
        0.02,
    )
    .unwrap();
    let run = |radius: f64| -> f64 {
        let spec = EnsembleSpec {
            n_samples: 4,
            radius,
            mean_phi: 0.1,
            seed: 65,
            horizon: 12.0,
            stride: 50,
            sigma_floor: 0.1,
        };
        let trajs = attractor::run_ensemble(&plan, &p, &spec, StepperKind::Standard, 2).unwrap();
        attractor::absorbing_fit(&trajs).unwrap().t1_hat
    };
    let t_small = run(4.0);
    let t_large = run(10.0);
    assert!(
        t_large >= t_small,
        "entry time decreased with a larger ball: {t_small} -> {t_large}"
    );
}

#[test]
fn regularity_report_batteries_are_consistent() {
    let grid = Grid::new(16, 16, 2.0, 2.0).unwrap();
    let plan = SpectralPlan::new(grid);
    let p = ModelParams::new(
        0.3,
        PotentialSpec::flory_huggins(1.0),
        CoeffSpec::Constant(1.0),
        CoeffSpec::Constant(0.5),
        0.01,
    )
    .unwrap();
    // equilibrium: grad mu vanishes, beta norms of phi = 0 vanish
    let eq = State::new(Field::zeros(grid), Field::constant(grid, 0.5), 0.0).unwrap();
    let mu = attractor::chemical_potential(&eq, &p).unwrap();
    let rep = diagnostics::regularity_report(&plan, &eq, &mu, &p, 0.0, 0.0).unwrap();
    assert!(rep.grad_mu < 1e-12);
    assert_eq!(rep.beta_l1, 0.0);
    assert_eq!(rep.beta_l3, 0.0);
    assert_eq!(rep.beta_l6, 0.0);
    assert!((rep.mass - 0.0).abs() < 1e-15);

    // random admissible state: negative-part norm dominated by the full norm
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    for _ in 0..20 {
        let state = random_state(grid, &mut rng, 0.1, 0.9, 0.1);
        let mu = attractor::chemical_potential(&state, &p).unwrap();
        let rep = diagnostics::regularity_report(&plan, &state, &mu, &p, 0.0, 0.0).unwrap();
        assert!(rep.beta_neg_l6 <= rep.beta_l6 * (1.0 + 1e-12));
        assert!(rep.phi_w26 >= rep.phi_v);
        assert!(rep.product_radius >= rep.phi_v + rep.sigma_a14);
    }
}
