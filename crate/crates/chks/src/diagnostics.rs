//! Energy, dissipation, phase-space metrics, the uniform Gronwall checker,
//! and the per-step regularity battery.

use crate::error::{Error, Result};
use crate::grid::{self, Field};
use crate::norms;
use crate::potential::PotentialSpec;
use crate::spectral::SpectralPlan;
use crate::stepper::{ModelParams, State};

/// Cells with sigma below this are excluded (and counted) wherever ln(sigma)
/// is required.
const LN_FLOOR: f64 = 1e-300;

/// Per-time diagnostic record. One row of the report CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateReport {
    pub t: f64,
    pub energy: f64,
    /// spatial mean of phi (conserved)
    pub mass: f64,
    /// int sigma (ln sigma - 1), with sigma <= 0 cells contributing 0
    pub entropy: f64,
    pub min_sigma: f64,
    pub sigma_undershoot: f64,
    pub dissipation_residual: f64,
    pub phi_v: f64,
    pub phi_lap_l2: f64,
    pub phi_lap_l6: f64,
    /// W^{2,6} proxy: ||phi||_V + ||lap phi||_L6
    pub phi_w26: f64,
    /// int beta_hat(phi); with phi_v this is the phase-space distance to 0
    pub beta_hat_l1: f64,
    pub beta_l1: f64,
    pub beta_l3: f64,
    pub beta_l6: f64,
    /// L6 norm of the negative part of beta(phi)
    pub beta_neg_l6: f64,
    pub sigma_l2: f64,
    pub sigma_l3: f64,
    pub sigma_v: f64,
    pub sigma_a14: f64,
    pub sigma_a34: f64,
    /// discrete H2 norm (L2 + gradient + Laplacian)
    pub sigma_h2: f64,
    pub grad_mu: f64,
    pub mu_v: f64,
    pub mu_mean_abs: f64,
    /// dist(phi, 0) + ||sigma||_{D(A^{1/4})} in the product phase metric
    pub product_radius: f64,
}

/// The physical energy
/// E = 1/2 ||grad phi||^2 + int( F(phi) + sigma (ln sigma - 1) - chi sigma phi ).
/// Sigma-undershoot cells (sigma < 0) contribute zero to the sigma terms.
pub fn energy(state: &State, params: &ModelParams) -> Result<f64> {
    if state.phi.max_abs() > 1.0 {
        return Err(Error::Domain {
            what: "energy",
            detail: format!("|phi| reaches {} > 1", state.phi.max_abs()),
        });
    }
    let pot = &params.potential;
    let mut bulk = Vec::with_capacity(state.phi.grid().len());
    for (&p, &s) in state.phi.values().iter().zip(state.sigma.values()) {
        let f = pot.big_f(p)?;
        let s = s.max(0.0);
        let ent = if s > 0.0 { s * (s.ln() - 1.0) } else { 0.0 };
        bulk.push(f + ent - params.chi * s * p);
    }
    Ok(
        0.5 * grid::grad_norm_sq(&state.phi)
            + grid::kahan_sum(&bulk) * state.phi.grid().cell_area(),
    )
}

/// Term-by-term content of the discrete dissipation identity
/// dE/dt + ||grad mu||^2 + int sigma |grad(ln sigma - chi phi)|^2
///       + int (h sigma^2 - k sigma)(ln sigma - chi phi) = 0.
#[derive(Debug, Clone, Copy)]
pub struct DissipationReport {
    /// (E(next) - E(prev)) / dt
    pub de_dt: f64,
    pub grad_mu_sq: f64,
    /// int sigma |grad(ln sigma - chi phi)|^2, face-mean sigma weights
    pub entropy_dissipation: f64,
    /// int (h sigma^2 - k sigma)(ln sigma - chi phi)
    pub logistic_term: f64,
    /// number of cells excluded from the ln terms (sigma below floor)
    pub excluded_cells: usize,
    /// the defect: sum of the four terms, expected O(dt)
    pub residual: f64,
}

pub fn dissipation_residual(
    prev: &State,
    next: &State,
    mu: &Field,
    dt: f64,
    params: &ModelParams,
) -> Result<DissipationReport> {
    grid::check_same_grid(&prev.phi, &next.phi)?;
    let g = next.phi.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let cell = g.cell_area();
    let de_dt = (energy(next, params)? - energy(prev, params)?) / dt;
    let grad_mu_sq = grid::grad_norm_sq(mu);

    // w = ln sigma - chi phi on cells where sigma is above the floor
    let sv = next.sigma.values();
    let pv = next.phi.values();
    let n = g.len();
    let mut w = vec![0.0; n];
    let mut valid = vec![true; n];
    let mut excluded = 0usize;
    for i in 0..n {
        if sv[i] < LN_FLOOR {
            valid[i] = false;
            excluded += 1;
        } else {
            w[i] = sv[i].ln() - params.chi * pv[i];
        }
    }

    // face-based sigma |grad w|^2, faces between two valid cells only
    let (hx, hy) = (g.hx(), g.hy());
    let mut terms = Vec::with_capacity(2 * n);
    for j in 0..ny {
        for i in 1..nx {
            let a = j * nx + i - 1;
            let b = j * nx + i;
            if valid[a] && valid[b] {
                let d = (w[b] - w[a]) / hx;
                terms.push(0.5 * (sv[a] + sv[b]) * d * d);
            }
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let a = (j - 1) * nx + i;
            let b = j * nx + i;
            if valid[a] && valid[b] {
                let d = (w[b] - w[a]) / hy;
                terms.push(0.5 * (sv[a] + sv[b]) * d * d);
            }
        }
    }
    let entropy_dissipation = grid::kahan_sum(&terms) * cell;

    let mut logistic = Vec::with_capacity(n);
    for i in 0..n {
        if valid[i] {
            let h = params.h_spec.eval_unchecked(sv[i], pv[i]);
            let k = params.k_spec.eval_unchecked(sv[i], pv[i]);
            logistic.push((h * sv[i] * sv[i] - k * sv[i]) * w[i]);
        }
    }
    let logistic_term = grid::kahan_sum(&logistic) * cell;

    Ok(DissipationReport {
        de_dt,
        grad_mu_sq,
        entropy_dissipation,
        logistic_term,
        excluded_cells: excluded,
        residual: de_dt + grad_mu_sq + entropy_dissipation + logistic_term,
    })
}

fn check_admissible(spec: &PotentialSpec, phi: &Field, what: &'static str) -> Result<()> {
    phi.ensure_finite(what)?;
    let (lo, hi) = spec.domain();
    if phi.min() < lo || phi.max() > hi {
        return Err(Error::Domain {
            what,
            detail: format!(
                "phi range [{}, {}] leaves [{lo}, {hi}]",
                phi.min(),
                phi.max()
            ),
        });
    }
    Ok(())
}

/// Energy-space metric: ||phi1 - phi2||_V + ||beta_hat(phi1) - beta_hat(phi2)||_L1.
pub fn phase_distance(spec: &PotentialSpec, phi1: &Field, phi2: &Field) -> Result<f64> {
    grid::check_same_grid(phi1, phi2)?;
    check_admissible(spec, phi1, "phase_distance")?;
    check_admissible(spec, phi2, "phase_distance")?;
    let d = phi1.checked_sub(phi2)?;
    let v = (grid::l2_norm(&d).powi(2) + grid::grad_norm_sq(&d)).sqrt();
    let mut terms = Vec::with_capacity(phi1.grid().len());
    for (&a, &b) in phi1.values().iter().zip(phi2.values()) {
        let t = (spec.beta_hat(a)? - spec.beta_hat(b)?).abs();
        if !t.is_finite() {
            return Err(Error::Domain {
                what: "phase_distance",
                detail: "beta_hat not integrable on an argument".into(),
            });
        }
        terms.push(t);
    }
    Ok(v + grid::kahan_sum(&terms) * phi1.grid().cell_area())
}

/// Strong (attractor-space) metric:
/// ||phi1 - phi2||_{H2} + ||beta0(phi1) - beta0(phi2)||_{L2},
/// with the discrete H2 norm (L2, gradient and Laplacian parts).
pub fn strong_phase_distance(spec: &PotentialSpec, phi1: &Field, phi2: &Field) -> Result<f64> {
    grid::check_same_grid(phi1, phi2)?;
    for f in [phi1, phi2] {
        check_admissible(spec, f, "strong_phase_distance")?;
        let (lo, hi) = spec.domain();
        if f.min() <= lo || f.max() >= hi {
            // beta0 must be finite, which for singular walls needs the open interval
            if matches!(
                spec.beta0(if f.max() >= hi { hi } else { lo }),
                Err(Error::SingularEndpoint { .. })
            ) {
                return Err(Error::Domain {
                    what: "strong_phase_distance",
                    detail: "phi touches a singular endpoint".into(),
                });
            }
        }
    }
    let d = phi1.checked_sub(phi2)?;
    let h2 = (grid::l2_norm(&d).powi(2)
        + grid::grad_norm_sq(&d)
        + grid::l2_norm(&grid::laplacian_neumann(&d)).powi(2))
    .sqrt();
    let mut diff = Vec::with_capacity(phi1.grid().len());
    for (&a, &b) in phi1.values().iter().zip(phi2.values()) {
        diff.push(spec.beta0(a)? - spec.beta0(b)?);
    }
    let l2 = (grid::kahan_sum(&diff.iter().map(|v| v * v).collect::<Vec<_>>())
        * phi1.grid().cell_area())
    .sqrt();
    Ok(h2 + l2)
}

/// The Gronwall quantity of the uniqueness estimate for the difference of two
/// states: 1/2 ||ds - ds_mean||_*^2 + 1/2 |ds_mean|^2 + 2 C ||dphi||_*^2.
/// The phi difference must have zero mean (two trajectories sharing m).
pub fn contraction_metric(plan: &SpectralPlan, a: &State, b: &State, c_weight: f64) -> Result<f64> {
    if a.phi.grid() != b.phi.grid() {
        return Err(Error::GridMismatch(
            "contraction_metric on different grids".into(),
        ));
    }
    if !(c_weight > 0.0) {
        return Err(Error::Domain {
            what: "contraction_metric",
            detail: format!("C weight must be positive (got {c_weight})"),
        });
    }
    let dphi = a.phi.checked_sub(&b.phi)?;
    let rms = grid::l2_norm(&dphi) / dphi.grid().area().sqrt();
    let m = grid::mean(&dphi);
    if m.abs() > 1e-10 * rms.max(1e-30) && rms > 0.0 {
        return Err(Error::Precondition(format!(
            "phi difference must have zero mean (got {m:.3e})"
        )));
    }
    let dsig = a.sigma.checked_sub(&b.sigma)?;
    let s_mean = grid::mean(&dsig);
    let mut centered = dsig;
    centered.shift(-s_mean);
    let ns = norms::norms(plan, &centered)?;
    let np = norms::norms(plan, &dphi)?;
    Ok(0.5 * ns.dual_star * ns.dual_star
        + 0.5 * s_mean * s_mean
        + 2.0 * c_weight * np.dual_star * np.dual_star)
}

/// Windowed integral bounds and the conclusion of the uniform Gronwall lemma
/// on sampled series.
#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// (a2 + a3) e^{a1}
    pub bound: f64,
    /// sample times t where y(t) exceeded the bound
    pub violations: Vec<f64>,
}

/// Check y(t + window) <= (a2 + a3) e^{a1} on uniformly sampled nonnegative
/// series with a_i the suprema of trapezoid window integrals of a, b, y.
pub fn uniform_gronwall_check(
    y: &[f64],
    a: &[f64],
    b: &[f64],
    t0: f64,
    sample_dt: f64,
    window: f64,
) -> Result<GronwallReport> {
    let n = y.len();
    if a.len() != n || b.len() != n {
        return Err(Error::Domain {
            what: "uniform_gronwall_check",
            detail: "series lengths differ".into(),
        });
    }
    if !(sample_dt > 0.0) || !(window > 0.0) {
        return Err(Error::Domain {
            what: "uniform_gronwall_check",
            detail: "sample_dt and window must be positive".into(),
        });
    }
    let span = (n.saturating_sub(1)) as f64 * sample_dt;
    if span < 2.0 * window {
        return Err(Error::SeriesTooShort(format!(
            "span {span} shorter than two windows ({})",
            2.0 * window
        )));
    }
    let w = (window / sample_dt).round();
    if ((window / sample_dt) - w).abs() > 1e-9 * w.max(1.0) {
        return Err(Error::Domain {
            what: "uniform_gronwall_check",
            detail: "window must be an integer number of samples".into(),
        });
    }
    let w = w as usize;
    for series in [y, a, b] {
        if series.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Domain {
                what: "uniform_gronwall_check",
                detail: "series must be nonnegative".into(),
            });
        }
    }

    let window_sup = |s: &[f64]| -> f64 {
        let mut sup = 0.0f64;
        // trapezoid over [j, j + w], all admissible starts
        let mut acc = 0.5 * (s[0] + s[w]) + s[1..w].iter().sum::<f64>();
        sup = sup.max(acc * sample_dt);
        for j in 1..n - w {
            acc += 0.5 * (s[j + w] + s[j + w - 1]) - 0.5 * (s[j] + s[j - 1]);
            sup = sup.max(acc * sample_dt);
        }
        sup
    };
    let a1 = window_sup(a);
    let a2 = window_sup(b);
    let a3 = window_sup(y);
    let bound = (a2 + a3) * a1.exp();
    let mut violations = Vec::new();
    for (idx, &yv) in y.iter().enumerate().skip(w) {
        if yv > bound * (1.0 + 1e-12) {
            violations.push(t0 + idx as f64 * sample_dt);
        }
    }
    Ok(GronwallReport {
        a1,
        a2,
        a3,
        bound,
        violations,
    })
}

/// Fill the full battery for one state.
pub fn regularity_report(
    plan: &SpectralPlan,
    state: &State,
    mu: &Field,
    params: &ModelParams,
    dissipation: f64,
    sigma_undershoot: f64,
) -> Result<StateReport> {
    let pot = &params.potential;
    check_admissible(pot, &state.phi, "regularity_report")?;
    let (lo, hi) = pot.domain();
    if state.phi.min() <= lo || state.phi.max() >= hi {
        return Err(Error::Domain {
            what: "regularity_report",
            detail: "phi touches the potential endpoint; beta(phi) not finite".into(),
        });
    }
    let g = state.phi.grid();

    let mut beta_vals = Vec::with_capacity(g.len());
    let mut beta_hat_vals = Vec::with_capacity(g.len());
    for &p in state.phi.values() {
        beta_vals.push(pot.beta(p)?);
        beta_hat_vals.push(pot.beta_hat(p)?);
    }
    let beta_field = Field::new(g, beta_vals)?;
    let beta_hat_l1 =
        grid::kahan_sum(&beta_hat_vals.iter().map(|v| v.abs()).collect::<Vec<_>>()) * g.cell_area();

    let phi_norms = norms::norms(plan, &state.phi)?;
    let sigma_norms = norms::norms(plan, &state.sigma)?;
    let mu_norms = norms::norms(plan, mu)?;
    let lap_phi = grid::laplacian_neumann(&state.phi);
    let lap_sigma = grid::laplacian_neumann(&state.sigma);
    let phi_lap_l2 = grid::l2_norm(&lap_phi);
    let phi_lap_l6 = grid::lp_norm(&lap_phi, 6.0);
    let sigma_h2 = (sigma_norms.l2 * sigma_norms.l2
        + grid::grad_norm_sq(&state.sigma)
        + grid::l2_norm(&lap_sigma).powi(2))
    .sqrt();
    let beta_neg = beta_field.map(|v| v.min(0.0));

    let product_radius = phi_norms.v + beta_hat_l1 + sigma_norms.frac_quarter;
    Ok(StateReport {
        t: state.t,
        energy: energy(state, params)?,
        mass: phi_norms.mean,
        entropy: grid::integrate(
            &state.sigma,
            |s| {
                if s > 0.0 {
                    s * (s.ln() - 1.0)
                } else {
                    0.0
                }
            },
        ),
        min_sigma: state.sigma.min(),
        sigma_undershoot,
        dissipation_residual: dissipation,
        phi_v: phi_norms.v,
        phi_lap_l2,
        phi_lap_l6,
        phi_w26: phi_norms.v + phi_lap_l6,
        beta_hat_l1,
        beta_l1: grid::integrate(&beta_field, f64::abs),
        beta_l3: grid::lp_norm(&beta_field, 3.0),
        beta_l6: grid::lp_norm(&beta_field, 6.0),
        beta_neg_l6: grid::lp_norm(&beta_neg, 6.0),
        sigma_l2: sigma_norms.l2,
        sigma_l3: sigma_norms.l3,
        sigma_v: sigma_norms.v,
        sigma_a14: sigma_norms.frac_quarter,
        sigma_a34: sigma_norms.frac_three_quarter,
        sigma_h2,
        grad_mu: grid::grad_norm_sq(mu).sqrt(),
        mu_v: mu_norms.v,
        mu_mean_abs: mu_norms.mean.abs(),
        product_radius,
    })
}

/// Outcome of the minimum-principle probe on a stored trajectory.
#[derive(Debug, Clone)]
pub struct MinPrincipleReport {
    /// min over snapshots in [tau, T] of min sigma
    pub delta: f64,
    /// (x, y, t) attaining the minimum
    pub argmin: (f64, f64, f64),
    /// per-snapshot (t, ||v_-||_L1) with v = ln sigma
    pub v_neg_l1: Vec<(f64, f64)>,
    /// per-snapshot (t, ||v_-||_L6)
    pub v_neg_l6: Vec<(f64, f64)>,
}

/// Quantitative lower bound on sigma over [tau, T] along stored snapshots,
/// with the negative-part entropy norms of v = ln sigma. Requires strictly
/// positive initial sigma (finite initial ln integral).
pub fn min_principle_report(
    snapshots: &[State],
    tau: f64,
    t_end: f64,
) -> Result<MinPrincipleReport> {
    if snapshots.is_empty() {
        return Err(Error::EmptySet("min_principle_report needs snapshots"));
    }
    let first = &snapshots[0];
    if first.sigma.min() <= 0.0 {
        return Err(Error::Precondition(format!(
            "sigma_0 must be strictly positive (min = {:.3e}); ln sigma_0 not integrable",
            first.sigma.min()
        )));
    }
    let mut delta = f64::INFINITY;
    let mut argmin = (0.0, 0.0, 0.0);
    let mut v_neg_l1 = Vec::new();
    let mut v_neg_l6 = Vec::new();
    let mut seen_window = false;
    for s in snapshots.iter().filter(|s| s.t <= t_end) {
        let vneg = s.sigma.map(|x| {
            if x < LN_FLOOR {
                f64::INFINITY
            } else {
                (-x.ln()).max(0.0)
            }
        });
        v_neg_l1.push((s.t, grid::integrate(&vneg, |v| v)));
        v_neg_l6.push((s.t, grid::lp_norm(&vneg, 6.0)));
        if s.t >= tau {
            seen_window = true;
            let g = s.sigma.grid();
            for (idx, &v) in s.sigma.values().iter().enumerate() {
                if v < delta {
                    delta = v;
                    argmin = (g.x(idx % g.nx()), g.y(idx / g.nx()), s.t);
                }
            }
        }
    }
    if !seen_window {
        return Err(Error::SeriesTooShort(format!(
            "no snapshots inside [{tau}, {t_end}]"
        )));
    }
    Ok(MinPrincipleReport {
        delta,
        argmin,
        v_neg_l1,
        v_neg_l6,
    })
}
