//! Ensemble experiments probing the long-time behavior: sampling balls of
//! initial data in the product phase metric, driving trajectories (with
//! halving-on-failure), measuring absorbing-set entry, Hausdorff
//! semi-distances between finite state sets, and late-time regularity
//! envelopes.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::diagnostics::{self, StateReport};
use crate::error::{Error, Result};
use crate::grid::{self, Field};
use crate::potential::PotentialSpec;
use crate::spectral::SpectralPlan;
use crate::stepper::{self, ModelParams, State};

/// Ball of initial data to sample: radius in the product metric
/// dist(phi, 0) + ||sigma||_{D(A^{1/4})}.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub n_samples: usize,
    pub radius: f64,
    pub mean_phi: f64,
    pub seed: u64,
    pub horizon: f64,
    /// snapshot every `stride` accepted steps
    pub stride: usize,
    pub sigma_floor: f64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Domain {
                what: "EnsembleSpec",
                detail: "n_samples must be >= 1".into(),
            });
        }
        if self.mean_phi.abs() >= 1.0 {
            return Err(Error::Domain {
                what: "EnsembleSpec",
                detail: format!("|m| must be < 1 (got {})", self.mean_phi),
            });
        }
        if !(self.radius > 0.0) || !(self.horizon > 0.0) || self.stride == 0 {
            return Err(Error::Domain {
                what: "EnsembleSpec",
                detail: "radius, horizon, stride must be positive".into(),
            });
        }
        if self.sigma_floor < 0.0 {
            return Err(Error::Domain {
                what: "EnsembleSpec",
                detail: "sigma_floor must be >= 0".into(),
            });
        }
        Ok(())
    }
}

/// Which nutrient formulation drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepperKind {
    Standard,
    /// integrates v = ln sigma; sigma stays strictly positive
    Entropic,
}

/// Product-metric radius of a state: dist(phi, 0) + ||sigma||_{D(A^{1/4})}.
pub fn product_radius(plan: &SpectralPlan, pot: &PotentialSpec, state: &State) -> Result<f64> {
    let zero = Field::zeros(state.phi.grid());
    let d = diagnostics::phase_distance(pot, &state.phi, &zero)?;
    Ok(d + plan.fractional_norm(&state.sigma, 0.25)?)
}

fn synth_smooth(plan: &SpectralPlan, rng: &mut ChaCha12Rng, modes: usize) -> Field {
    let grid = plan.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut coeffs = vec![0.0; nx * ny];
    for ky in 0..=modes.min(ny - 1) {
        for kx in 0..=modes.min(nx - 1) {
            if kx == 0 && ky == 0 {
                continue;
            }
            let decay = 1.0 / (1.0 + (kx * kx + ky * ky) as f64);
            coeffs[ky * nx + kx] = rng.gen_range(-1.0..1.0) * decay;
        }
    }
    let mut vals = Vec::new();
    plan.inverse_raw(&coeffs, &mut vals);
    Field::new(grid, vals).expect("synthesized field matches the plan grid")
}

/// Draw `n_samples` seeded initial states inside the radius-R ball. Each phi
/// is a smoothed random field confined to [-1 + margin, 1 - margin] with its
/// mean corrected exactly to m; each sigma is sigma_floor plus a smooth
/// nonnegative bump. Fluctuation amplitudes are bisected so the product
/// radius lands on a per-sample target inside the ball.
pub fn sample_initial_ball(
    plan: &SpectralPlan,
    pot: &PotentialSpec,
    spec: &EnsembleSpec,
) -> Result<Vec<State>> {
    spec.validate()?;
    let grid = plan.grid();
    // the admissible band follows the potential's own domain (narrower than
    // [-1, 1] for tabulated graphs)
    let (dom_lo, dom_hi) = pot.domain();
    let margin = 0.03 * (dom_hi - dom_lo) / 2.0;
    let (band_lo, band_hi) = (dom_lo + margin, dom_hi - margin);
    if spec.mean_phi <= band_lo + margin || spec.mean_phi >= band_hi - margin {
        return Err(Error::Infeasible(format!(
            "mean {} leaves no room inside [{band_lo}, {band_hi}]",
            spec.mean_phi
        )));
    }
    let floor_state = State {
        phi: Field::constant(grid, spec.mean_phi),
        sigma: Field::constant(grid, spec.sigma_floor),
        t: 0.0,
    };
    let r_floor = product_radius(plan, pot, &floor_state)?;
    if spec.radius < r_floor * 1.02 {
        return Err(Error::Infeasible(format!(
            "radius {} cannot hold mean-{} fields (floor {:.6})",
            spec.radius, spec.mean_phi, r_floor
        )));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let shape_phi = synth_smooth(plan, &mut rng, 6);
        let shape_sig = synth_smooth(plan, &mut rng, 6);
        let target = r_floor + rng.gen_range(0.35..0.95) * (spec.radius - r_floor);

        let phi_cap = (band_hi - spec.mean_phi).min(spec.mean_phi - band_lo);
        let phi_unit = {
            let mut f = shape_phi;
            let scale = 1.0 / f.max_abs().max(1e-12);
            f.scale(scale);
            f
        };
        let sig_bump = shape_sig.map(|v| v * v);

        let build = |theta: f64| -> Result<State> {
            let mut phi = phi_unit.clone();
            phi.scale(theta * phi_cap);
            phi.shift(spec.mean_phi);
            // additive correction, then clamp-and-recorrect until exact
            for _ in 0..100 {
                let m = grid::mean(&phi);
                if (m - spec.mean_phi).abs() <= 1e-12 {
                    break;
                }
                phi.shift(spec.mean_phi - m);
                for v in phi.values_mut() {
                    *v = v.clamp(band_lo, band_hi);
                }
            }
            let sigma = sig_bump.map(|v| spec.sigma_floor + theta * v);
            State::new(phi, sigma, 0.0)
        };

        // radius grows with theta; bisect onto the target
        let mut lo = 0.0;
        let mut hi = 1.0;
        let r_hi = product_radius(plan, pot, &build(1.0)?)?;
        let state = if r_hi <= target {
            build(1.0)?
        } else {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let r = product_radius(plan, pot, &build(mid)?)?;
                if r < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            build(0.5 * (lo + hi))?
        };
        debug_assert!(product_radius(plan, pot, &state)? <= spec.radius * (1.0 + 1e-9));
        out.push(state);
    }
    Ok(out)
}

/// One trajectory's outputs: a report per accepted step (plus the initial
/// row), snapshots at the stride, and the failure record if it stopped early.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub reports: Vec<StateReport>,
    pub snapshots: Vec<State>,
    pub failure: Option<(f64, String)>,
}

/// Instantaneous chemical potential of a state (used for the initial report
/// row, where no step has produced one).
pub fn chemical_potential(state: &State, params: &ModelParams) -> Result<Field> {
    let pot = &params.potential;
    let mut eta = Vec::with_capacity(state.phi.grid().len());
    for &p in state.phi.values() {
        eta.push(pot.beta(p)?);
    }
    let eta = Field::new(state.phi.grid(), eta)?;
    let mut g = state.phi.clone();
    g.scale(pot.lambda);
    let g = g.add_scaled(&state.sigma, params.chi)?;
    grid::laplacian_neumann(&state.phi)
        .map(|v| -v)
        .add_scaled(&eta, 1.0)?
        .checked_sub(&g)
}

enum Advanced {
    Standard(stepper::StepOutcome),
    Entropic { state: State, mu: Field, v: Field },
}

fn advance_standard(
    plan: &SpectralPlan,
    state: &State,
    params: &ModelParams,
    depth: usize,
) -> Result<stepper::StepOutcome> {
    match stepper::step(plan, state, params) {
        Ok(out) => Ok(out),
        Err(_) if depth > 0 => {
            // halve the step, cover the same interval with two sub-steps
            let half = params.with_dt(0.5 * params.dt);
            let first = advance_standard(plan, state, &half, depth - 1)?;
            let second = advance_standard(plan, &first.state, &half, depth - 1)?;
            Ok(stepper::StepOutcome {
                state: second.state,
                mu: second.mu,
                sigma_undershoot: first.sigma_undershoot.max(second.sigma_undershoot),
            })
        }
        Err(e) => Err(e),
    }
}

fn advance_entropic(
    plan: &SpectralPlan,
    state: &State,
    v: &Field,
    params: &ModelParams,
    depth: usize,
) -> Result<(State, Field, Field)> {
    let attempt = (|| -> Result<(State, Field, Field)> {
        let (phi_next, mu) = stepper::step_ch(plan, &state.phi, &state.sigma, params)?;
        let v_next = stepper::step_entropic(plan, v, &phi_next, params)?;
        let sigma_next = v_next.map(f64::exp);
        sigma_next.ensure_finite("entropic sigma")?;
        Ok((
            State {
                phi: phi_next,
                sigma: sigma_next,
                t: state.t + params.dt,
            },
            mu,
            v_next,
        ))
    })();
    match attempt {
        Ok(out) => Ok(out),
        Err(_) if depth > 0 => {
            let half = params.with_dt(0.5 * params.dt);
            let (s1, _, v1) = advance_entropic(plan, state, v, &half, depth - 1)?;
            advance_entropic(plan, &s1, &v1, &half, depth - 1)
        }
        Err(e) => Err(e),
    }
}

/// Drive one trajectory to the horizon. Failed steps are retried at halved dt
/// (up to three halvings); a persistent failure ends the trajectory with the
/// failure recorded, keeping everything gathered so far.
pub fn run_trajectory(
    plan: &SpectralPlan,
    initial: State,
    params: &ModelParams,
    horizon: f64,
    stride: usize,
    kind: StepperKind,
) -> Trajectory {
    let n_steps = (horizon / params.dt).round().max(1.0) as usize;
    let mut reports = Vec::with_capacity(n_steps + 1);
    let mut snapshots = Vec::new();
    let mut failure = None;

    let mut v = match kind {
        StepperKind::Entropic => {
            if initial.sigma.min() <= 0.0 {
                return Trajectory {
                    reports,
                    snapshots,
                    failure: Some((0.0, "entropic stepper needs sigma_0 > 0".into())),
                };
            }
            Some(initial.sigma.map(f64::ln))
        }
        StepperKind::Standard => None,
    };

    let mut state = initial;
    match chemical_potential(&state, params)
        .and_then(|mu| diagnostics::regularity_report(plan, &state, &mu, params, 0.0, 0.0))
    {
        Ok(rep) => reports.push(rep),
        Err(e) => {
            return Trajectory {
                reports,
                snapshots,
                failure: Some((state.t, e.to_string())),
            }
        }
    }
    snapshots.push(state.clone());

    for step_idx in 1..=n_steps {
        let advanced: Result<Advanced> = match kind {
            StepperKind::Standard => {
                advance_standard(plan, &state, params, 3).map(Advanced::Standard)
            }
            StepperKind::Entropic => advance_entropic(
                plan,
                &state,
                v.as_ref().expect("entropic carries v"),
                params,
                3,
            )
            .map(|(s, mu, vn)| Advanced::Entropic {
                state: s,
                mu,
                v: vn,
            }),
        };
        let (next, mu, undershoot) = match advanced {
            Ok(Advanced::Standard(out)) => (out.state, out.mu, out.sigma_undershoot),
            Ok(Advanced::Entropic {
                state: s,
                mu,
                v: vn,
            }) => {
                v = Some(vn);
                (s, mu, 0.0)
            }
            Err(e) => {
                failure = Some((state.t, e.to_string()));
                break;
            }
        };
        let dis = match diagnostics::dissipation_residual(&state, &next, &mu, params.dt, params) {
            Ok(d) => d.residual,
            Err(_) => f64::NAN,
        };
        match diagnostics::regularity_report(plan, &next, &mu, params, dis, undershoot) {
            Ok(rep) => reports.push(rep),
            Err(e) => {
                failure = Some((next.t, e.to_string()));
                break;
            }
        }
        state = next;
        if step_idx % stride == 0 {
            snapshots.push(state.clone());
        }
    }
    if snapshots.last().map(|s| s.t) != Some(state.t) {
        snapshots.push(state);
    }
    Trajectory {
        reports,
        snapshots,
        failure,
    }
}

/// Sample the initial ball and run every trajectory, spreading them over
/// `workers` threads. Failures stay per-trajectory.
pub fn run_ensemble(
    plan: &SpectralPlan,
    params: &ModelParams,
    spec: &EnsembleSpec,
    kind: StepperKind,
    workers: usize,
) -> Result<Vec<Trajectory>> {
    params.validate()?;
    let initials = sample_initial_ball(plan, &params.potential, spec)?;
    let n = initials.len();
    let slots: Vec<Mutex<Option<Trajectory>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let queue = AtomicUsize::new(0);
    let initials: Vec<Mutex<Option<State>>> =
        initials.into_iter().map(|s| Mutex::new(Some(s))).collect();

    let workers = workers.max(1).min(n);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = queue.fetch_add(1, Ordering::SeqCst);
                if idx >= n {
                    break;
                }
                let initial = initials[idx]
                    .lock()
                    .expect("initial state mutex")
                    .take()
                    .expect("each slot is taken once");
                let traj = run_trajectory(plan, initial, params, spec.horizon, spec.stride, kind);
                *slots[idx].lock().expect("trajectory slot mutex") = Some(traj);
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("poisoned slot")
                .expect("worker filled every slot")
        })
        .collect())
}

/// Unilateral Hausdorff distance sup_{a in A} inf_{k in K} d(a, k) in the
/// product metric d = phase_distance(phi) + ||A^{1/4}(sigma_a - sigma_k)||.
pub fn hausdorff_semidist(
    plan: &SpectralPlan,
    pot: &PotentialSpec,
    a: &[State],
    k: &[State],
) -> Result<f64> {
    if a.is_empty() || k.is_empty() {
        return Err(Error::EmptySet("hausdorff_semidist needs nonempty sets"));
    }
    let mut sup = 0.0f64;
    for sa in a {
        let mut inf = f64::INFINITY;
        for sk in k {
            let dp = diagnostics::phase_distance(pot, &sa.phi, &sk.phi)?;
            let ds = plan.fractional_norm(&sa.sigma.checked_sub(&sk.sigma)?, 0.25)?;
            inf = inf.min(dp + ds);
        }
        sup = sup.max(inf);
    }
    Ok(sup)
}

/// Empirical dissipativity summary: exponential fit of the energy
/// max-envelope and the absorbing-radius entry statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorbingFit {
    /// fitted decay rate (> 0 when conclusive)
    pub kappa_hat: f64,
    /// fitted offset
    pub c_hat: f64,
    /// fitted initial envelope value
    pub e0_hat: f64,
    /// absorbing radius: 1.1 x long-time product-radius envelope
    pub r1_hat: f64,
    /// stable entry time: earliest time after which the envelope never
    /// exceeds r1_hat
    pub t1_hat: f64,
    /// whether the envelope flattened enough for the fit to mean anything
    pub conclusive: bool,
    /// whether the envelope re-exceeded r1_hat * 1.1 after first entry
    pub re_exit: bool,
}

/// Fit E(t) ~ E0 e^{-kappa t} + C on an envelope series, plus absorbing-set
/// statistics on the product-radius envelope. Exposed separately from
/// [`absorbing_fit`] so synthetic series can exercise it directly.
pub fn fit_envelope(times: &[f64], energy_env: &[f64], radius_env: &[f64]) -> Result<AbsorbingFit> {
    let n = times.len();
    if n < 10 || energy_env.len() != n || radius_env.len() != n {
        return Err(Error::SeriesTooShort(
            "envelope fit needs >= 10 aligned samples".into(),
        ));
    }

    // flattening heuristic: last-decade slope below 1% of the initial slope
    let slope = |lo: usize, hi: usize| -> f64 {
        let m = hi - lo;
        let tbar = times[lo..hi].iter().sum::<f64>() / m as f64;
        let ebar = energy_env[lo..hi].iter().sum::<f64>() / m as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in lo..hi {
            num += (times[i] - tbar) * (energy_env[i] - ebar);
            den += (times[i] - tbar) * (times[i] - tbar);
        }
        num / den.max(1e-300)
    };
    let dec = (n / 10).max(2);
    let conclusive = slope(n - dec, n).abs() < 0.01 * slope(0, dec).abs().max(1e-300);

    // offset candidates around the tail mean; keep the best log-linear fit
    let tail = &energy_env[n - (n / 5).max(2)..];
    let c_tail = tail.iter().sum::<f64>() / tail.len() as f64;
    let spread = (energy_env[0] - c_tail).abs().max(1e-300);
    let mut best = (f64::INFINITY, 0.0, 0.0, c_tail); // (sse, kappa, ln e0, c)
    for frac in [0.0, 0.002, 0.005, 0.01, 0.02, 0.04, 0.08] {
        let c = c_tail - frac * spread;
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        let mut m = 0usize;
        for i in 0..n {
            let d = energy_env[i] - c;
            if d > 0.02 * spread {
                let ln = d.ln();
                sx += times[i];
                sy += ln;
                sxx += times[i] * times[i];
                sxy += times[i] * ln;
                m += 1;
            }
        }
        if m < 5 {
            continue;
        }
        let mf = m as f64;
        let denom = mf * sxx - sx * sx;
        if denom.abs() < 1e-300 {
            continue;
        }
        let b = (mf * sxy - sx * sy) / denom;
        let a = (sy - b * sx) / mf;
        let mut sse = 0.0;
        for i in 0..n {
            let d = energy_env[i] - c;
            if d > 0.02 * spread {
                let r = d.ln() - (a + b * times[i]);
                sse += r * r;
            }
        }
        let sse = sse / mf;
        if sse < best.0 {
            best = (sse, -b, a, c);
        }
    }
    let (_, kappa_hat, ln_e0, c_hat) = best;

    // absorbing radius statistics
    let quarter = &radius_env[n - (n / 4).max(1)..];
    let r_base = quarter.iter().cloned().fold(0.0f64, f64::max);
    let r1_hat = 1.1 * r_base;
    let mut t1_idx = n;
    for i in (0..n).rev() {
        if radius_env[i] <= r1_hat {
            t1_idx = i;
        } else {
            break;
        }
    }
    let t1_hat = if t1_idx == 0 {
        0.0
    } else {
        times[t1_idx.min(n - 1)]
    };
    let first_entry = radius_env.iter().position(|&r| r <= r1_hat);
    let re_exit = match first_entry {
        Some(j) => radius_env[j..].iter().any(|&r| r > r1_hat * 1.1),
        None => true,
    };

    Ok(AbsorbingFit {
        kappa_hat,
        c_hat,
        e0_hat: ln_e0.exp(),
        r1_hat,
        t1_hat,
        conclusive,
        re_exit,
    })
}

/// Assemble the ensemble max-envelopes and fit them. Requires at least two
/// trajectories sharing the report time grid.
pub fn absorbing_fit(trajectories: &[Trajectory]) -> Result<AbsorbingFit> {
    if trajectories.len() < 2 {
        return Err(Error::Precondition(
            "absorbing_fit needs >= 2 trajectories".into(),
        ));
    }
    let n = trajectories
        .iter()
        .map(|t| t.reports.len())
        .min()
        .unwrap_or(0);
    if n < 10 {
        return Err(Error::SeriesTooShort(
            "trajectories too short to fit".into(),
        ));
    }
    let times: Vec<f64> = trajectories[0].reports[..n].iter().map(|r| r.t).collect();
    let mut energy_env = vec![f64::NEG_INFINITY; n];
    let mut radius_env = vec![f64::NEG_INFINITY; n];
    for traj in trajectories {
        for i in 0..n {
            energy_env[i] = energy_env[i].max(traj.reports[i].energy);
            radius_env[i] = radius_env[i].max(traj.reports[i].product_radius);
        }
    }
    fit_envelope(&times, &energy_env, &radius_env)
}

/// Sup and trend of one battery entry over a late-time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeStat {
    pub sup: f64,
    /// sup(Q4)/sup(Q3) - 1 over the window split into quarters
    pub last_quarter_growth: f64,
    /// finite and last-quarter growth below 1%
    pub bounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateTimeReport {
    pub t_min: f64,
    pub t_max: f64,
    pub sigma_h2: EnvelopeStat,
    pub phi_w26: EnvelopeStat,
    pub beta_l6: EnvelopeStat,
    pub mu_v: EnvelopeStat,
    pub sigma_v: EnvelopeStat,
}

/// Suprema and boundedness verdicts of the regularity battery over t >= t_min.
pub fn late_time_regularity(reports: &[StateReport], t_min: f64) -> Result<LateTimeReport> {
    let window: Vec<&StateReport> = reports.iter().filter(|r| r.t >= t_min).collect();
    if window.is_empty() {
        return Err(Error::EmptySet("late_time_regularity window is empty"));
    }
    let t_max = window.last().expect("nonempty").t;
    let stat = |get: &dyn Fn(&StateReport) -> f64| -> EnvelopeStat {
        let sup = window
            .iter()
            .map(|r| get(r))
            .fold(f64::NEG_INFINITY, f64::max);
        let q = window.len() / 4;
        let (q3, q4) = if q == 0 {
            (sup, sup)
        } else {
            let q3 = window[2 * q..3 * q]
                .iter()
                .map(|r| get(r))
                .fold(0.0f64, f64::max);
            let q4 = window[3 * q..]
                .iter()
                .map(|r| get(r))
                .fold(0.0f64, f64::max);
            (q3, q4)
        };
        let growth = q4 / q3.max(1e-300) - 1.0;
        EnvelopeStat {
            sup,
            last_quarter_growth: growth,
            bounded: sup.is_finite() && growth < 0.01,
        }
    };
    Ok(LateTimeReport {
        t_min,
        t_max,
        sigma_h2: stat(&|r| r.sigma_h2),
        phi_w26: stat(&|r| r.phi_w26),
        beta_l6: stat(&|r| r.beta_l6),
        mu_v: stat(&|r| r.mu_v),
        sigma_v: stat(&|r| r.sigma_v),
    })
}
