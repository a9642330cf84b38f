//! The norm battery used throughout the diagnostics: Lebesgue norms by
//! midpoint quadrature, the H1 norm with face-gradient quadrature, the dual
//! (V_0') norm of the zero-mean part, and fractional-power norms of A = I - Delta.

use crate::error::Result;
use crate::grid::{self, Field};
use crate::spectral::{self, SpectralPlan};

/// All norms of one field. `dual_star` is computed on the zero-mean part
/// (the mean is reported alongside).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l6: f64,
    pub linf: f64,
    /// (l2^2 + ||grad f||^2)^(1/2)
    pub v: f64,
    pub mean: f64,
    /// <xi, N xi>^(1/2) of xi = f - mean(f)
    pub dual_star: f64,
    /// ||A^(1/4) f||
    pub frac_quarter: f64,
    /// ||A^(1/2) f||
    pub frac_half: f64,
    /// ||A^(3/4) f||
    pub frac_three_quarter: f64,
}

pub fn norms(plan: &SpectralPlan, f: &Field) -> Result<NormReport> {
    let c = plan.transform(f)?;
    let cell = f.grid().cell_area();
    let l2 = grid::l2_norm(f);
    let grad_sq = grid::grad_norm_sq(f);
    let m = grid::mean(f);
    // subtracting the mean only changes the (0,0) coefficient
    let mut centered = c.clone();
    centered.coeffs[0] = 0.0;
    Ok(NormReport {
        l1: grid::integrate(f, f64::abs),
        l2,
        l3: grid::lp_norm(f, 3.0),
        l6: grid::lp_norm(f, 6.0),
        linf: f.max_abs(),
        v: (l2 * l2 + grad_sq).sqrt(),
        mean: m,
        dual_star: spectral::dual_star_of_coeffs(&centered, cell),
        frac_quarter: spectral::fractional_norm_of_coeffs(&c, cell, 0.25),
        frac_half: spectral::fractional_norm_of_coeffs(&c, cell, 0.5),
        frac_three_quarter: spectral::fractional_norm_of_coeffs(&c, cell, 0.75),
    })
}
