//! Shared helpers for the integration suites: independent scalar oracles and
//! random admissible state generation. The oracles never call into the PDE
//! solve paths they are used to check.

#![allow(dead_code)]

use chks::grid::{self, Field, Grid};
use chks::potential::CoeffSpec;
use chks::stepper::State;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// One semi-implicit Euler step of the spatially homogeneous logistic
/// equation with the same splitting as the nutrient stepper:
/// sigma' (1 + dt h(sigma, phi) sigma - dt k(sigma, phi)) = sigma.
pub fn scalar_logistic_step(sigma: f64, phi: f64, h: &CoeffSpec, k: &CoeffSpec, dt: f64) -> f64 {
    let hv = h.eval(sigma.max(0.0), phi).unwrap();
    let kv = k.eval(sigma.max(0.0), phi).unwrap();
    sigma / (1.0 + dt * hv * sigma - dt * kv)
}

/// Explicit Euler step of the homogeneous entropic equation
/// v' = -h(e^v, phi) e^v + k(e^v, phi).
pub fn scalar_entropic_step(v: f64, phi: f64, h: &CoeffSpec, k: &CoeffSpec, dt: f64) -> f64 {
    let sig = v.exp();
    let hv = h.eval(sig, phi).unwrap();
    let kv = k.eval(sig, phi).unwrap();
    v + dt * (kv - hv * sig)
}

/// Exact solution of sigma' = -h sigma^2 + k sigma with constant h, k > 0.
pub fn logistic_exact(sigma0: f64, h: f64, k: f64, t: f64) -> f64 {
    let e = (k * t).exp();
    k * sigma0 * e / (k + h * sigma0 * (e - 1.0))
}

/// Smooth random field built from a few low cosine modes, sampled at cell
/// centers (Neumann compatible).
pub fn smooth_random_field(grid: Grid, rng: &mut ChaCha8Rng, modes: usize) -> Field {
    let mut f = Field::zeros(grid);
    for kx in 0..=modes {
        for ky in 0..=modes {
            if kx == 0 && ky == 0 {
                continue;
            }
            let amp = rng.gen_range(-1.0..1.0) / (1.0 + (kx * kx + ky * ky) as f64);
            let g = Field::from_fn(grid, |x, y| {
                amp * (std::f64::consts::PI * kx as f64 * x / grid.lx()).cos()
                    * (std::f64::consts::PI * ky as f64 * y / grid.ly()).cos()
            });
            f = f.add_scaled(&g, 1.0).unwrap();
        }
    }
    f
}

/// Random admissible state: |phi| <= phi_cap strictly inside (-1, 1) with the
/// requested mean, sigma >= sigma_floor.
pub fn random_state(
    grid: Grid,
    rng: &mut ChaCha8Rng,
    mean_phi: f64,
    phi_cap: f64,
    sigma_floor: f64,
) -> State {
    let raw = smooth_random_field(grid, rng, 3);
    let centered = raw.map(|v| v - 0.0);
    let mut centered = centered;
    let m = grid::mean(&centered);
    centered.shift(-m);
    let max = centered.max_abs().max(1e-12);
    let amp = (phi_cap - mean_phi.abs()).max(0.05) / max;
    let mut phi = centered;
    phi.scale(amp);
    phi.shift(mean_phi);
    let m = grid::mean(&phi);
    phi.shift(mean_phi - m);

    let s_raw = smooth_random_field(grid, rng, 3);
    let sigma = s_raw.map(|v| sigma_floor + 0.5 * (v * v));
    State::new(phi, sigma, 0.0).unwrap()
}
