//! Built-in verification suites behind `chks verify <level>`: operator
//! identities, stepper oracles, and estimate/fit machinery, each printing one
//! pass/fail line per check.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::attractor;
use crate::diagnostics;
use crate::grid::{self, Field, Grid};
use crate::potential::{CoeffSpec, PotentialSpec};
use crate::spectral::SpectralPlan;
use crate::stepper::{self, ModelParams, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    Operators,
    Steppers,
    Estimates,
}

pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

type Check = (String, Box<dyn Fn() -> Result<String, String>>);

fn rel_err(a: &Field, b: &Field) -> f64 {
    let d = a.checked_sub(b).expect("same grid");
    grid::l2_norm(&d) / grid::l2_norm(b).max(1e-300)
}

fn random_zero_mean(grid: Grid, rng: &mut ChaCha8Rng) -> Field {
    let mut f = Field::new(
        grid,
        (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .expect("sized");
    let m = grid::mean(&f);
    f.shift(-m);
    f
}

fn operator_checks() -> Vec<Check> {
    let mut checks: Vec<Check> = Vec::new();
    for (nx, ny) in [(16, 16), (32, 32), (64, 64)] {
        let grid = Grid::new(nx, ny, 1.3, 0.9).expect("valid grid");
        checks.push((
            format!("{nx}x{ny} N(B f) = f and B(N f) = f on zero-mean fields (1e-10)"),
            Box::new(move || {
                let plan = SpectralPlan::new(grid);
                let mut rng = ChaCha8Rng::seed_from_u64(100 + nx as u64);
                let mut worst = 0.0f64;
                for _ in 0..5 {
                    let f = random_zero_mean(grid, &mut rng);
                    let bf = grid::laplacian_neumann(&f).map(|v| -v);
                    let nb = plan.inv_neumann_laplacian(&bf).map_err(|e| e.to_string())?;
                    worst = worst.max(rel_err(&nb, &f));
                    let nf = plan.inv_neumann_laplacian(&f).map_err(|e| e.to_string())?;
                    let bn = grid::laplacian_neumann(&nf).map(|v| -v);
                    worst = worst.max(rel_err(&bn, &f));
                }
                if worst <= 1e-10 {
                    Ok(format!("max rel err {worst:.2e}"))
                } else {
                    Err(format!("max rel err {worst:.2e} > 1e-10"))
                }
            }),
        ));
        checks.push((
            format!("{nx}x{ny} A^(1/2) twice equals A (1e-11)"),
            Box::new(move || {
                let plan = SpectralPlan::new(grid);
                let mut rng = ChaCha8Rng::seed_from_u64(200 + nx as u64);
                let f = Field::new(
                    grid,
                    (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                )
                .expect("sized");
                let half_twice = plan
                    .fractional_apply(
                        &plan.fractional_apply(&f, 0.5).map_err(|e| e.to_string())?,
                        0.5,
                    )
                    .map_err(|e| e.to_string())?;
                let a_direct = f
                    .checked_sub(&grid::laplacian_neumann(&f))
                    .expect("same grid");
                let err = rel_err(&half_twice, &a_direct);
                if err <= 1e-11 {
                    Ok(format!("rel err {err:.2e}"))
                } else {
                    Err(format!("rel err {err:.2e} > 1e-11"))
                }
            }),
        ));
        checks.push((
            format!("{nx}x{ny} summation by parts exact (1e-12)"),
            Box::new(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(300 + nx as u64);
                let mut worst = 0.0f64;
                for _ in 0..5 {
                    let f = random_zero_mean(grid, &mut rng);
                    let g = random_zero_mean(grid, &mut rng);
                    let lhs = grid::inner(&grid::laplacian_neumann(&f), &g).expect("same grid");
                    let rhs = -grid::face_dot(&grid::face_gradient(&f), &grid::face_gradient(&g));
                    let scale = lhs.abs().max(rhs.abs()).max(1e-30);
                    worst = worst.max((lhs - rhs).abs() / scale);
                }
                if worst <= 1e-12 {
                    Ok(format!("max rel defect {worst:.2e}"))
                } else {
                    Err(format!("max rel defect {worst:.2e} > 1e-12"))
                }
            }),
        ));
        checks.push((
            format!("{nx}x{ny} cosine transform round trip (1e-12)"),
            Box::new(move || {
                let plan = SpectralPlan::new(grid);
                let mut rng = ChaCha8Rng::seed_from_u64(400 + nx as u64);
                let f = Field::new(
                    grid,
                    (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                )
                .expect("sized");
                let back = plan
                    .inverse(&plan.transform(&f).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
                let err = rel_err(&back, &f);
                if err <= 1e-12 {
                    Ok(format!("rel err {err:.2e}"))
                } else {
                    Err(format!("rel err {err:.2e} > 1e-12"))
                }
            }),
        ));
        checks.push((
            format!("{nx}x{ny} spectral and stencil Laplacians agree (1e-11)"),
            Box::new(move || {
                let plan = SpectralPlan::new(grid);
                let mut rng = ChaCha8Rng::seed_from_u64(500 + nx as u64);
                let f = Field::new(
                    grid,
                    (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                )
                .expect("sized");
                let a = plan.laplacian_spectral(&f).map_err(|e| e.to_string())?;
                let b = grid::laplacian_neumann(&f);
                let err = rel_err(&a, &b);
                if err <= 1e-11 {
                    Ok(format!("rel err {err:.2e}"))
                } else {
                    Err(format!("rel err {err:.2e} > 1e-11"))
                }
            }),
        ));
    }
    checks
}

fn stepper_checks() -> Vec<Check> {
    let mut checks: Vec<Check> = Vec::new();
    checks.push((
        "decoupled uniform run tracks the scalar logistic oracle (1e-12/step)".into(),
        Box::new(|| {
            let grid = Grid::new(16, 16, 1.0, 1.0).expect("valid grid");
            let plan = SpectralPlan::new(grid);
            let params = ModelParams::new(
                0.0,
                PotentialSpec::flory_huggins(1.0),
                CoeffSpec::Saturating {
                    lo: 0.8,
                    hi: 1.6,
                    scale: 1.0,
                },
                CoeffSpec::Constant(0.9),
                0.02,
            )
            .map_err(|e| e.to_string())?;
            let m = 0.2;
            let mut state = State::new(Field::constant(grid, m), Field::constant(grid, 2.0), 0.0)
                .map_err(|e| e.to_string())?;
            let mut sig = 2.0;
            let mut worst = 0.0f64;
            for _ in 0..300 {
                let out = stepper::step(&plan, &state, &params).map_err(|e| e.to_string())?;
                let h = params.h_spec.eval(sig, m).map_err(|e| e.to_string())?;
                let k = params.k_spec.eval(sig, m).map_err(|e| e.to_string())?;
                sig /= 1.0 + params.dt * h * sig - params.dt * k;
                for &v in out.state.sigma.values() {
                    worst = worst.max((v - sig).abs());
                }
                state = out.state;
            }
            if worst <= 1e-12 * sig.max(1.0) {
                Ok(format!("max deviation {worst:.2e}"))
            } else {
                Err(format!("max deviation {worst:.2e}"))
            }
        }),
    ));
    checks.push((
        "coupled run conserves mass, confines phi, keeps sigma nonnegative".into(),
        Box::new(|| {
            let grid = Grid::new(32, 32, 8.0, 8.0).expect("valid grid");
            let plan = SpectralPlan::new(grid);
            let params = ModelParams::new(
                0.6,
                PotentialSpec::flory_huggins(3.0),
                CoeffSpec::Constant(0.9),
                CoeffSpec::Constant(0.4),
                0.01,
            )
            .map_err(|e| e.to_string())?;
            let spec = attractor::EnsembleSpec {
                n_samples: 1,
                radius: 12.0,
                mean_phi: 0.1,
                seed: 7,
                horizon: 2.0,
                stride: 50,
                sigma_floor: 0.1,
            };
            let initial = attractor::sample_initial_ball(&plan, &params.potential, &spec)
                .map_err(|e| e.to_string())?
                .remove(0);
            let m0 = grid::mean(&initial.phi);
            let mut state = initial;
            let mut max_drift = 0.0f64;
            let mut min_sigma = f64::INFINITY;
            let mut max_phi = 0.0f64;
            for _ in 0..200 {
                let out = stepper::step(&plan, &state, &params).map_err(|e| e.to_string())?;
                max_drift = max_drift.max((grid::mean(&out.state.phi) - m0).abs());
                min_sigma = min_sigma.min(out.state.sigma.min());
                max_phi = max_phi.max(out.state.phi.max_abs());
                state = out.state;
            }
            if max_drift <= 1e-12 && min_sigma >= -1e-12 && max_phi < 1.0 {
                Ok(format!(
                    "drift {max_drift:.2e}, min sigma {min_sigma:.2e}, max |phi| {max_phi:.4}"
                ))
            } else {
                Err(format!(
                    "drift {max_drift:.2e}, min sigma {min_sigma:.2e}, max |phi| {max_phi:.4}"
                ))
            }
        }),
    ));
    checks.push((
        "logistic fixed point is stationary; entropic stepper stays positive".into(),
        Box::new(|| {
            let grid = Grid::new(16, 16, 1.0, 1.0).expect("valid grid");
            let plan = SpectralPlan::new(grid);
            let params = ModelParams::new(
                0.0,
                PotentialSpec::flory_huggins(0.5),
                CoeffSpec::Constant(2.0),
                CoeffSpec::Constant(1.0),
                0.05,
            )
            .map_err(|e| e.to_string())?;
            let st = State::new(Field::constant(grid, 0.1), Field::constant(grid, 0.5), 0.0)
                .map_err(|e| e.to_string())?;
            let out = stepper::step(&plan, &st, &params).map_err(|e| e.to_string())?;
            let drift = (out.state.sigma.max() - 0.5)
                .abs()
                .max((out.state.sigma.min() - 0.5).abs());
            if drift > 1e-10 {
                return Err(format!("fixed point drifted by {drift:.2e}"));
            }
            let traj = attractor::run_trajectory(
                &plan,
                State::new(
                    Field::constant(grid, 0.1),
                    Field::from_fn(grid, |x, _| {
                        0.05 + 0.5 * (std::f64::consts::PI * x).cos().powi(2)
                    }),
                    0.0,
                )
                .map_err(|e| e.to_string())?,
                &params,
                1.0,
                10,
                attractor::StepperKind::Entropic,
            );
            if let Some((t, why)) = traj.failure {
                return Err(format!("entropic run failed at t = {t}: {why}"));
            }
            let min_sig = traj
                .snapshots
                .iter()
                .map(|s| s.sigma.min())
                .fold(f64::INFINITY, f64::min);
            if min_sig > 0.0 {
                Ok(format!(
                    "fixed-point drift {drift:.2e}, entropic min sigma {min_sig:.3e}"
                ))
            } else {
                Err(format!("entropic sigma reached {min_sig:.3e}"))
            }
        }),
    ));
    checks
}

fn estimate_checks() -> Vec<Check> {
    let mut checks: Vec<Check> = Vec::new();
    checks.push((
        "uniform Gronwall checker on closed-form series".into(),
        Box::new(|| {
            let dt = 0.001;
            let n = 4001;
            let y: Vec<f64> = (0..n).map(|i| (-(i as f64) * dt).exp()).collect();
            let zero = vec![0.0; n];
            let rep = diagnostics::uniform_gronwall_check(&y, &zero, &zero, 0.0, dt, 1.0)
                .map_err(|e| e.to_string())?;
            if !rep.violations.is_empty() {
                return Err(format!("{} violations on e^-t", rep.violations.len()));
            }
            // y' = a y + b with a = 0.3, b = 0.2, integrated exactly
            let (a, b) = (0.3, 0.2);
            let y: Vec<f64> = (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    (1.0 + b / a) * (a * t).exp() - b / a
                })
                .collect();
            let av = vec![a; n];
            let bv = vec![b; n];
            let rep = diagnostics::uniform_gronwall_check(&y, &av, &bv, 0.0, dt, 1.0)
                .map_err(|e| e.to_string())?;
            if rep.violations.is_empty() {
                Ok(format!(
                    "bounds a1 {:.3}, a2 {:.3}, a3 {:.3}",
                    rep.a1, rep.a2, rep.a3
                ))
            } else {
                Err(format!(
                    "{} violations on the exact ODE series",
                    rep.violations.len()
                ))
            }
        }),
    ));
    checks.push((
        "absorbing fit recovers synthetic exponential within 5%".into(),
        Box::new(|| {
            let n = 500;
            let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.02).collect();
            let energy: Vec<f64> = times
                .iter()
                .map(|&t| 5.0 * (-2.0 * t).exp() + 1.0)
                .collect();
            let radius: Vec<f64> = times
                .iter()
                .map(|&t| 2.0 + 3.0 * (-1.5 * t).exp())
                .collect();
            let fit =
                attractor::fit_envelope(&times, &energy, &radius).map_err(|e| e.to_string())?;
            let kerr = (fit.kappa_hat - 2.0_f64).abs() / 2.0;
            let cerr = (fit.c_hat - 1.0_f64).abs();
            if kerr < 0.05 && cerr < 0.05 && fit.conclusive && !fit.re_exit {
                Ok(format!("kappa {:.4}, C {:.4}", fit.kappa_hat, fit.c_hat))
            } else {
                Err(format!(
                    "kappa {:.4} (err {kerr:.3}), C {:.4} (err {cerr:.3})",
                    fit.kappa_hat, fit.c_hat
                ))
            }
        }),
    ));
    checks.push((
        "phase metrics satisfy identity, symmetry, triangle".into(),
        Box::new(|| {
            let grid = Grid::new(12, 12, 1.0, 1.0).expect("valid grid");
            let pot = PotentialSpec::flory_huggins(1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            for _ in 0..25 {
                let mut fields = Vec::new();
                for _ in 0..3 {
                    let f = Field::new(
                        grid,
                        (0..grid.len()).map(|_| rng.gen_range(-0.9..0.9)).collect(),
                    )
                    .expect("sized");
                    fields.push(f);
                }
                for d in [
                    diagnostics::phase_distance,
                    diagnostics::strong_phase_distance,
                ] {
                    let d01 = d(&pot, &fields[0], &fields[1]).map_err(|e| e.to_string())?;
                    let d10 = d(&pot, &fields[1], &fields[0]).map_err(|e| e.to_string())?;
                    let d02 = d(&pot, &fields[0], &fields[2]).map_err(|e| e.to_string())?;
                    let d12 = d(&pot, &fields[1], &fields[2]).map_err(|e| e.to_string())?;
                    let dself = d(&pot, &fields[0], &fields[0]).map_err(|e| e.to_string())?;
                    if dself != 0.0 {
                        return Err(format!("d(x,x) = {dself:.3e}"));
                    }
                    if (d01 - d10).abs() > 1e-14 * d01.max(1.0) {
                        return Err("symmetry violated".into());
                    }
                    if d02 > d01 + d12 + 1e-12 * (d01 + d12) {
                        return Err("triangle inequality violated".into());
                    }
                }
            }
            Ok("25 random triples, both metrics".into())
        }),
    ));
    checks.push((
        "equilibrium dissipation residual vanishes".into(),
        Box::new(|| {
            let grid = Grid::new(16, 16, 1.0, 1.0).expect("valid grid");
            let params = ModelParams::new(
                0.0,
                PotentialSpec::flory_huggins(0.0),
                CoeffSpec::Constant(2.0),
                CoeffSpec::Constant(1.0),
                0.1,
            )
            .map_err(|e| e.to_string())?;
            let st = State::new(Field::constant(grid, 0.2), Field::constant(grid, 0.5), 0.0)
                .map_err(|e| e.to_string())?;
            let mu = Field::constant(
                grid,
                params.potential.f_value(0.2).map_err(|e| e.to_string())?,
            );
            let rep = diagnostics::dissipation_residual(&st, &st, &mu, 0.1, &params)
                .map_err(|e| e.to_string())?;
            if rep.residual.abs() <= 1e-9 {
                Ok(format!("residual {:.2e}", rep.residual))
            } else {
                Err(format!("residual {:.2e} > 1e-9", rep.residual))
            }
        }),
    ));
    checks.push((
        "contraction metric is zero only at identical states and scales quadratically".into(),
        Box::new(|| {
            let grid = Grid::new(12, 12, 1.0, 1.0).expect("valid grid");
            let plan = SpectralPlan::new(grid);
            let base = Field::from_fn(grid, |x, y| {
                0.05 * (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos()
            });
            let a = State::new(Field::constant(grid, 0.0), Field::constant(grid, 1.0), 0.0)
                .map_err(|e| e.to_string())?;
            let mk = |lam: f64| {
                let mut phi = base.clone();
                phi.scale(lam);
                State::new(phi, Field::constant(grid, 1.0), 0.0).expect("admissible")
            };
            let z =
                diagnostics::contraction_metric(&plan, &a, &a, 1.0).map_err(|e| e.to_string())?;
            let m1 = diagnostics::contraction_metric(&plan, &mk(1.0), &a, 1.0)
                .map_err(|e| e.to_string())?;
            let m2 = diagnostics::contraction_metric(&plan, &mk(2.0), &a, 1.0)
                .map_err(|e| e.to_string())?;
            if z == 0.0 && m1 > 0.0 && (m2 / m1 - 4.0).abs() < 1e-9 {
                Ok(format!("quadratic ratio {:.12}", m2 / m1))
            } else {
                Err(format!("zero {z:.3e}, ratio {:.6}", m2 / m1))
            }
        }),
    ));
    checks
}

/// Run one suite, printing a pass/fail table. Returns the individual results.
pub fn run_level(level: VerifyLevel) -> Vec<CheckResult> {
    let checks = match level {
        VerifyLevel::Operators => operator_checks(),
        VerifyLevel::Steppers => stepper_checks(),
        VerifyLevel::Estimates => estimate_checks(),
    };
    let mut results = Vec::new();
    for (name, check) in checks {
        let outcome = check();
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        println!(
            "{} {:<68} {}",
            if passed { "PASS" } else { "FAIL" },
            name,
            detail
        );
        results.push(CheckResult {
            name,
            passed,
            detail,
        });
    }
    results
}
