//! Time integration of the coupled system.
//!
//! Each composite step advances the Cahn-Hilliard block first and then the
//! nutrient equation with the fresh order parameter:
//!
//! ```text
//! (phi' - phi)/dt = lap(mu'),   mu' = -lap(phi') + beta(phi') - lambda phi - chi sigma,
//! (sig' - sig)/dt = lap(sig') - chi div(face(sig) grad phi') - h(sig,phi') sig sig' + k(sig,phi') sig',
//! ```
//!
//! The singular term is implicit: eliminating mu gives
//! `(I + dt B^2) phi' + dt B beta(phi') = phi + dt B (lambda phi + chi sigma)`
//! with `B = -lap`, solved by a quasi-Newton iteration whose linear block is
//! diagonal in the cosine basis and whose iterates are kept strictly inside
//! (-1, 1) by the pointwise resolvent. The nutrient system is symmetric
//! positive definite and is solved by preconditioned conjugate gradients.
//! An alternative stepper integrates v = ln(sigma), which keeps sigma
//! positive by construction.

use crate::error::{Error, Result};
use crate::grid::{self, Field};
use crate::potential::{CoeffSpec, PotentialSpec};
use crate::spectral::SpectralPlan;

/// Tolerated sigma undershoot of the standard stepper; larger undershoots are
/// a step failure, never silently repaired.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// Model coefficients and solver knobs for one run.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub chi: f64,
    pub potential: PotentialSpec,
    pub h_spec: CoeffSpec,
    pub k_spec: CoeffSpec,
    pub dt: f64,
    pub solver_tol: f64,
    pub max_newton: usize,
}

impl ModelParams {
    pub fn new(
        chi: f64,
        potential: PotentialSpec,
        h_spec: CoeffSpec,
        k_spec: CoeffSpec,
        dt: f64,
    ) -> Result<ModelParams> {
        let p = ModelParams {
            chi,
            potential,
            h_spec,
            k_spec,
            dt,
            solver_tol: 1e-10,
            max_newton: 50,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi >= 0.0) || !self.chi.is_finite() {
            return Err(Error::Domain {
                what: "ModelParams",
                detail: format!("chi must be >= 0 (got {})", self.chi),
            });
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Domain {
                what: "ModelParams",
                detail: format!("dt must be > 0 (got {})", self.dt),
            });
        }
        self.h_spec.validate()?;
        self.k_spec.validate()?;
        // the semi-implicit logistic split keeps the M-matrix structure of the
        // nutrient system only for dt k_max < 1/2
        let (_, k_hi) = self.k_spec.bounds();
        if self.dt >= 0.5 / k_hi {
            return Err(Error::Domain {
                what: "ModelParams",
                detail: format!(
                    "dt = {} violates dt < 1/(2 k_max) = {}",
                    self.dt,
                    0.5 / k_hi
                ),
            });
        }
        Ok(())
    }

    pub fn with_dt(&self, dt: f64) -> ModelParams {
        ModelParams { dt, ..self.clone() }
    }
}

/// Verdict of the coefficient compatibility condition chi^2 <= 3 h_min.
/// Failing it is allowed (the condition is sufficient, not necessary);
/// the margin is reported so runs can be flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityReport {
    pub pass: bool,
    /// 3 h_min - chi^2
    pub margin: f64,
}

pub fn check_compatibility(params: &ModelParams) -> CompatibilityReport {
    let (h_lo, _) = params.h_spec.bounds();
    let margin = 3.0 * h_lo - params.chi * params.chi;
    CompatibilityReport {
        pass: margin >= 0.0,
        margin,
    }
}

/// One trajectory state: order parameter, nutrient concentration, time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub phi: Field,
    pub sigma: Field,
    pub t: f64,
}

impl State {
    pub fn new(phi: Field, sigma: Field, t: f64) -> Result<State> {
        grid::check_same_grid(&phi, &sigma)?;
        let s = State { phi, sigma, t };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.phi.ensure_finite("State::phi")?;
        self.sigma.ensure_finite("State::sigma")?;
        if self.phi.max_abs() > 1.0 {
            return Err(Error::Domain {
                what: "State",
                detail: format!("|phi| reaches {} > 1", self.phi.max_abs()),
            });
        }
        if self.sigma.min() < -POSITIVITY_TOL {
            return Err(Error::Domain {
                what: "State",
                detail: format!("sigma undershoots to {}", self.sigma.min()),
            });
        }
        Ok(())
    }
}

/// Result of one composite step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: State,
    /// Chemical potential of the accepted Cahn-Hilliard step.
    pub mu: Field,
    /// max(0, -min sigma) of the new nutrient field.
    pub sigma_undershoot: f64,
}

fn neg_laplacian(f: &Field) -> Field {
    grid::laplacian_neumann(f).map(|v| -v)
}

/// Semi-implicit Cahn-Hilliard step. Returns (phi_next, mu_next).
///
/// The outer iteration linearizes beta with a scalar curvature in the
/// spectrally diagonal solve; whenever an update leaves the safe interior the
/// iterate is re-projected through the pointwise resolvent of the linearized
/// monotone term, which never lands on the endpoints. The accepted iterate is
/// re-centered to the exact initial mean, so mass conservation holds to
/// rounding regardless of iteration count.
pub fn step_ch(
    plan: &SpectralPlan,
    phi: &Field,
    sigma: &Field,
    params: &ModelParams,
) -> Result<(Field, Field)> {
    grid::check_same_grid(phi, sigma)?;
    let pot = &params.potential;
    let dt = params.dt;
    let n = phi.grid().len();
    let target_mean = grid::mean(phi);

    // explicit part of the chemical potential
    let g = {
        let mut g = phi.clone();
        g.scale(pot.lambda);
        g.add_scaled(sigma, params.chi)?
    };
    let b = phi.add_scaled(&neg_laplacian(&g), dt)?;
    let b_scale = grid::l2_norm(&b).max(1.0);

    // start strictly inside the domain
    let mut cur = if phi.max_abs() < 1.0 {
        phi.clone()
    } else {
        let mut c = Field::zeros(phi.grid());
        for (o, &v) in c.values_mut().iter_mut().zip(phi.values()) {
            *o = pot.resolvent(1.0, v + if v >= 0.0 { 1.0 } else { -1.0 })?;
        }
        c
    };

    let lam = plan.eigenvalues();
    let mut eta = vec![0.0; n];
    let mut dvec = vec![0.0; n];
    let mut coeffs = Vec::new();
    let mut delta_vals = Vec::new();
    let mut prev_res = f64::INFINITY;
    let mut damping = 1.0;

    for iter in 0..=params.max_newton {
        let cv = cur.values();
        let mut dmin = f64::INFINITY;
        let mut dmax = 0.0_f64;
        for i in 0..n {
            eta[i] = pot.beta(cv[i])?;
            let d = pot.beta_prime(cv[i]);
            dvec[i] = d;
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        let eta_field = Field::new(cur.grid(), eta.clone())?;
        let w = neg_laplacian(&cur).add_scaled(&eta_field, 1.0)?;
        let residual = cur.add_scaled(&neg_laplacian(&w), dt)?.checked_sub(&b)?;
        let res = grid::l2_norm(&residual);
        if !res.is_finite() {
            return Err(Error::StepFailure {
                t: f64::NAN,
                residual: res,
                detail: "Cahn-Hilliard residual not finite".into(),
            });
        }
        if res <= params.solver_tol * b_scale {
            let mu = neg_laplacian(&cur)
                .add_scaled(&eta_field, 1.0)?
                .checked_sub(&g)?;
            if cur.max_abs() >= 1.0 {
                return Err(Error::StepFailure {
                    t: f64::NAN,
                    residual: res,
                    detail: "phi reached the potential endpoint".into(),
                });
            }
            return Ok((cur, mu));
        }
        if iter == params.max_newton {
            return Err(Error::StepFailure {
                t: f64::NAN,
                residual: res / b_scale,
                detail: format!("Cahn-Hilliard solver stalled after {iter} iterations"),
            });
        }
        if res > prev_res {
            damping *= 2.0;
        }
        prev_res = res;

        // scalar curvature centered in the observed beta' range; the extra
        // damping only grows after a residual increase
        let s = (0.5 * (dmin + dmax) * damping).max(1.0);
        plan.forward_raw(residual.values(), &mut coeffs);
        for (c, &l) in coeffs.iter_mut().zip(lam) {
            *c = -*c / (1.0 + dt * l * l + s * dt * l);
        }
        plan.inverse_raw(&coeffs, &mut delta_vals);

        let mut next_vals = Vec::with_capacity(n);
        let cv = cur.values();
        let mut overshoot = false;
        for i in 0..n {
            let x = cv[i] + delta_vals[i];
            if x.abs() > 1.0 - 1e-9 {
                overshoot = true;
            }
            next_vals.push(x);
        }
        if overshoot {
            // project through the resolvent of the linearized graph: exact
            // when the linearization is, strictly interior always
            for i in 0..n {
                let y = next_vals[i] + eta[i] + dvec[i] * delta_vals[i];
                next_vals[i] = pot.resolvent(1.0, y)?;
            }
        }
        let mut next = Field::new(cur.grid(), next_vals)?;
        let shift = target_mean - grid::mean(&next);
        next.shift(shift);
        if next.max_abs() >= 1.0 {
            return Err(Error::StepFailure {
                t: f64::NAN,
                residual: res / b_scale,
                detail: "mean correction pushed phi onto the endpoint".into(),
            });
        }
        cur = next;
    }
    unreachable!("loop returns or errors");
}

/// One nutrient step with the fresh order parameter. The cross-diffusion flux
/// uses arithmetic face means of sigma and the logistic term is split
/// `-h(sig,phi') sig sig' + k(sig,phi') sig'`, which keeps the linear system
/// an M-matrix for dt k_max < 1/2.
pub fn step_nutrient(
    plan: &SpectralPlan,
    sigma: &Field,
    phi_next: &Field,
    params: &ModelParams,
) -> Result<Field> {
    grid::check_same_grid(sigma, phi_next)?;
    let dt = params.dt;
    let n = sigma.grid().len();

    let mut flux = grid::face_gradient(phi_next);
    flux.scale_by_face_mean(sigma)?;
    let cross = grid::divergence(&flux)?;

    let sv = sigma.values();
    let pv = phi_next.values();
    let mut a = vec![0.0; n];
    for i in 0..n {
        let h = params.h_spec.eval_unchecked(sv[i], pv[i]);
        let k = params.k_spec.eval_unchecked(sv[i], pv[i]);
        a[i] = h * sv[i] - k;
    }
    let rhs = sigma.add_scaled(&cross, -dt * params.chi)?;

    let apply = |x: &Field| -> Result<Field> {
        let mut out = x.add_scaled(&neg_laplacian(x), dt)?;
        for (o, (&xi, &ai)) in out.values_mut().iter_mut().zip(x.values().iter().zip(&a)) {
            *o += dt * ai * xi;
        }
        Ok(out)
    };

    // spectral preconditioner with the mean reaction coefficient
    let a_bar = grid::kahan_sum(&a) / n as f64;
    let lam = plan.eigenvalues();
    let mut scratch = Vec::new();
    let mut precond = |r: &Field| -> Result<Field> {
        plan.forward_raw(r.values(), &mut scratch);
        for (c, &l) in scratch.iter_mut().zip(lam) {
            *c /= 1.0 + dt * l + dt * a_bar;
        }
        let mut vals = Vec::new();
        plan.inverse_raw(&scratch, &mut vals);
        Field::new(r.grid(), vals)
    };

    let tol = 1e-11 * grid::l2_norm(&rhs).max(1.0);
    let mut x = sigma.clone();
    let mut r = rhs.checked_sub(&apply(&x)?)?;
    // always take at least one iteration: stopping on the warm start alone
    // would freeze slowly-moving states at the stop threshold
    if grid::l2_norm(&r) == 0.0 {
        return Ok(x);
    }
    let mut z = precond(&r)?;
    let mut p = z.clone();
    let mut rz = grid::inner(&r, &z)?;
    for _ in 0..500 {
        let ap = apply(&p)?;
        let alpha = rz / grid::inner(&p, &ap)?;
        x = x.add_scaled(&p, alpha)?;
        r = r.add_scaled(&ap, -alpha)?;
        if grid::l2_norm(&r) <= tol {
            x.ensure_finite("step_nutrient")?;
            return Ok(x);
        }
        z = precond(&r)?;
        let rz_new = grid::inner(&r, &z)?;
        p = z.add_scaled(&p, rz_new / rz)?;
        rz = rz_new;
    }
    Err(Error::StepFailure {
        t: f64::NAN,
        residual: grid::l2_norm(&r),
        detail: "nutrient conjugate-gradient solve did not converge".into(),
    })
}

/// Composite step: Cahn-Hilliard block first, then the nutrient equation with
/// the fresh phi. Enforces the state invariants and records any sigma
/// undershoot (never repaired).
pub fn step(plan: &SpectralPlan, state: &State, params: &ModelParams) -> Result<StepOutcome> {
    let attach_t = |e: Error| match e {
        Error::StepFailure {
            residual, detail, ..
        } => Error::StepFailure {
            t: state.t,
            residual,
            detail,
        },
        other => other,
    };
    let (phi_next, mu) = step_ch(plan, &state.phi, &state.sigma, params).map_err(attach_t)?;
    let sigma_next = step_nutrient(plan, &state.sigma, &phi_next, params).map_err(attach_t)?;

    let undershoot = (-sigma_next.min()).max(0.0);
    if undershoot > POSITIVITY_TOL {
        return Err(Error::StepFailure {
            t: state.t,
            residual: undershoot,
            detail: "sigma undershoot beyond tolerance".into(),
        });
    }
    let mean_drift = (grid::mean(&phi_next) - grid::mean(&state.phi)).abs();
    if mean_drift > 1e-12 * grid::mean(&state.phi).abs().max(1.0) {
        return Err(Error::StepFailure {
            t: state.t,
            residual: mean_drift,
            detail: "mass conservation violated".into(),
        });
    }
    Ok(StepOutcome {
        state: State {
            phi: phi_next,
            sigma: sigma_next,
            t: state.t + params.dt,
        },
        mu,
        sigma_undershoot: undershoot,
    })
}

/// One step of the entropic reformulation in v = ln(sigma):
/// `v_t - lap(v) = |grad v|^2 - h(sig,phi') sig + k(sig,phi') - chi grad v . grad phi' - chi lap(phi')`,
/// with lap(v) implicit and everything else explicit at sigma = exp(v^n).
/// The output stays finite, so sigma = exp(v) is strictly positive by
/// construction.
pub fn step_entropic(
    plan: &SpectralPlan,
    v: &Field,
    phi_next: &Field,
    params: &ModelParams,
) -> Result<Field> {
    grid::check_same_grid(v, phi_next)?;
    if v.max_abs() > 700.0 {
        return Err(Error::StepFailure {
            t: f64::NAN,
            residual: v.max_abs(),
            detail: "entropic variable out of range (near-vacuum or blow-up)".into(),
        });
    }
    let dt = params.dt;
    let n = v.grid().len();
    let (gxv, gyv) = grid::cell_gradient(v);
    let (gxp, gyp) = grid::cell_gradient(phi_next);
    let lap_phi = grid::laplacian_neumann(phi_next);

    let mut rhs = vec![0.0; n];
    let vv = v.values();
    let pv = phi_next.values();
    for i in 0..n {
        let sig = vv[i].exp();
        let h = params.h_spec.eval_unchecked(sig, pv[i]);
        let k = params.k_spec.eval_unchecked(sig, pv[i]);
        let grad_sq = gxv.values()[i] * gxv.values()[i] + gyv.values()[i] * gyv.values()[i];
        let transport = gxv.values()[i] * gxp.values()[i] + gyv.values()[i] * gyp.values()[i];
        rhs[i] = vv[i]
            + dt * (grad_sq - h * sig + k
                - params.chi * transport
                - params.chi * lap_phi.values()[i]);
    }

    let mut coeffs = Vec::new();
    plan.forward_raw(&rhs, &mut coeffs);
    for (c, &l) in coeffs.iter_mut().zip(plan.eigenvalues()) {
        *c /= 1.0 + dt * l;
    }
    let mut vals = Vec::new();
    plan.inverse_raw(&coeffs, &mut vals);
    let out = Field::new(v.grid(), vals)?;
    out.ensure_finite("step_entropic")?;
    Ok(out)
}
