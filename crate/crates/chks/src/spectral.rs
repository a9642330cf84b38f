//! Cosine-basis diagonalization of the discrete Neumann Laplacian.
//!
//! On the cell-centered grid the mirrored-ghost five-point Laplacian is
//! exactly diagonalized by the DCT-II basis
//! `e_k(i) = cos(pi k (i + 1/2) / n)` per axis, with eigenvalues
//! `lambda_k = (4/h^2) sin^2(pi k / (2n))`. This gives exact (non-iterative)
//! realizations of the zero-mean inverse Laplacian N and of the fractional
//! powers of `A = I - Delta`.
//!
//! Transforms are dense matrix products per axis; grids are small enough
//! (<= 256 per axis) that this is fast and has no tuning knobs.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{self, Field, Grid};

/// Cached transform matrices and eigenvalues for one grid.
#[derive(Debug, Clone)]
pub struct SpectralPlan {
    grid: Grid,
    // Orthonormal DCT-II rows: ex[k * nx + i] = sqrt(a_k / nx) cos(pi k (i+1/2) / nx).
    ex: Vec<f64>,
    ey: Vec<f64>,
    lam_x: Vec<f64>,
    lam_y: Vec<f64>,
    // lam[ky * nx + kx] = lam_x[kx] + lam_y[ky], shared with SpectralCoeffs.
    lam: Arc<Vec<f64>>,
}

/// Cosine coefficients of a field, indexed by wavenumber pair
/// (`coeffs[ky * nx + kx]`), with the matching Laplacian eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectralCoeffs {
    grid: Grid,
    pub coeffs: Vec<f64>,
    eigenvalues: Arc<Vec<f64>>,
}

impl SpectralCoeffs {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Eigenvalue of -Delta_h for mode (kx, ky).
    pub fn eigenvalue(&self, kx: usize, ky: usize) -> f64 {
        self.eigenvalues[ky * self.grid.nx() + kx]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

fn cosine_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for i in 0..n {
            m[k * n + i] =
                scale * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
        }
    }
    m
}

fn axis_eigenvalues(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = (std::f64::consts::PI * k as f64 / (2.0 * n as f64)).sin();
            4.0 * s * s / (h * h)
        })
        .collect()
}

impl SpectralPlan {
    pub fn new(grid: Grid) -> SpectralPlan {
        let (nx, ny) = (grid.nx(), grid.ny());
        let lam_x = axis_eigenvalues(nx, grid.hx());
        let lam_y = axis_eigenvalues(ny, grid.hy());
        let mut lam = vec![0.0; nx * ny];
        for ky in 0..ny {
            for kx in 0..nx {
                lam[ky * nx + kx] = lam_x[kx] + lam_y[ky];
            }
        }
        SpectralPlan {
            grid,
            ex: cosine_matrix(nx),
            ey: cosine_matrix(ny),
            lam_x,
            lam_y,
            lam: Arc::new(lam),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn eigenvalue(&self, kx: usize, ky: usize) -> f64 {
        self.lam[ky * self.grid.nx() + kx]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lam
    }

    pub fn axis_eigenvalues_x(&self) -> &[f64] {
        &self.lam_x
    }

    pub fn axis_eigenvalues_y(&self) -> &[f64] {
        &self.lam_y
    }

    fn check_grid(&self, g: Grid) -> Result<()> {
        if g == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "plan built for {:?}, got {:?}",
                self.grid, g
            )))
        }
    }

    /// Forward transform into raw coefficient storage.
    pub(crate) fn forward_raw(&self, values: &[f64], out: &mut Vec<f64>) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut tmp = vec![0.0; nx * ny];
        // along x: tmp[j, k] = sum_i ex[k, i] f[j, i]
        for j in 0..ny {
            let row = &values[j * nx..(j + 1) * nx];
            let trow = &mut tmp[j * nx..(j + 1) * nx];
            for (t, ek) in trow.iter_mut().zip(self.ex.chunks_exact(nx)) {
                let mut acc = 0.0;
                for (e, v) in ek.iter().zip(row) {
                    acc += e * v;
                }
                *t = acc;
            }
        }
        // along y: out[ky, kx] = sum_j ey[ky, j] tmp[j, kx]
        out.clear();
        out.resize(nx * ny, 0.0);
        for ky in 0..ny {
            let orow = &mut out[ky * nx..(ky + 1) * nx];
            for j in 0..ny {
                let c = self.ey[ky * ny + j];
                let trow = &tmp[j * nx..(j + 1) * nx];
                for (o, &t) in orow.iter_mut().zip(trow) {
                    *o += c * t;
                }
            }
        }
    }

    /// Inverse transform from raw coefficient storage.
    pub(crate) fn inverse_raw(&self, coeffs: &[f64], out: &mut Vec<f64>) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut tmp = vec![0.0; nx * ny];
        // along y: tmp[j, kx] = sum_ky ey[ky, j] c[ky, kx]
        for j in 0..ny {
            let trow = &mut tmp[j * nx..(j + 1) * nx];
            for ky in 0..ny {
                let c = self.ey[ky * ny + j];
                let crow = &coeffs[ky * nx..(ky + 1) * nx];
                for (t, &cv) in trow.iter_mut().zip(crow) {
                    *t += c * cv;
                }
            }
        }
        // along x: f[j, i] = sum_kx ex[kx, i] tmp[j, kx]
        out.clear();
        out.resize(nx * ny, 0.0);
        for j in 0..ny {
            let orow = &mut out[j * nx..(j + 1) * nx];
            let trow = &tmp[j * nx..(j + 1) * nx];
            for (&c, ek) in trow.iter().zip(self.ex.chunks_exact(nx)) {
                for (o, &e) in orow.iter_mut().zip(ek) {
                    *o += c * e;
                }
            }
        }
    }

    pub fn transform(&self, f: &Field) -> Result<SpectralCoeffs> {
        self.check_grid(f.grid())?;
        let mut coeffs = Vec::new();
        self.forward_raw(f.values(), &mut coeffs);
        Ok(SpectralCoeffs {
            grid: self.grid,
            coeffs,
            eigenvalues: Arc::clone(&self.lam),
        })
    }

    pub fn inverse(&self, c: &SpectralCoeffs) -> Result<Field> {
        self.check_grid(c.grid())?;
        let mut values = Vec::new();
        self.inverse_raw(&c.coeffs, &mut values);
        Field::new(self.grid, values)
    }

    /// -Delta_h applied in the eigenbasis. Agrees with the stencil Laplacian
    /// up to transform round-off.
    pub fn laplacian_spectral(&self, f: &Field) -> Result<Field> {
        self.check_grid(f.grid())?;
        let mut c = Vec::new();
        self.forward_raw(f.values(), &mut c);
        for (v, &l) in c.iter_mut().zip(self.lam.iter()) {
            *v *= -l;
        }
        let mut values = Vec::new();
        self.inverse_raw(&c, &mut values);
        Field::new(self.grid, values)
    }

    /// N f: the zero-mean solution g of -Delta g = f, for zero-mean f.
    pub fn inv_neumann_laplacian(&self, f: &Field) -> Result<Field> {
        self.check_grid(f.grid())?;
        let rms = grid::l2_norm(f) / self.grid.area().sqrt();
        let m = grid::mean(f);
        if m.abs() > 1e-10 * rms && rms > 0.0 {
            return Err(Error::Precondition(format!(
                "inv_neumann_laplacian requires zero mean: |mean| = {:.3e}, rms = {:.3e}",
                m.abs(),
                rms
            )));
        }
        let mut c = Vec::new();
        self.forward_raw(f.values(), &mut c);
        c[0] = 0.0;
        for (v, &l) in c.iter_mut().zip(self.lam.iter()).skip(1) {
            *v /= l;
        }
        let mut values = Vec::new();
        self.inverse_raw(&c, &mut values);
        Field::new(self.grid, values)
    }

    /// (I - Delta)^s via the eigenbasis; s = 0 is the identity, s = 1 is A,
    /// and exponents compose additively.
    pub fn fractional_apply(&self, f: &Field, s: f64) -> Result<Field> {
        self.check_grid(f.grid())?;
        let mut c = Vec::new();
        self.forward_raw(f.values(), &mut c);
        for (v, &l) in c.iter_mut().zip(self.lam.iter()) {
            *v *= (1.0 + l).powf(s);
        }
        let mut values = Vec::new();
        self.inverse_raw(&c, &mut values);
        Field::new(self.grid, values)
    }

    /// L2 norm of A^s f computed directly from the coefficients (Parseval).
    pub fn fractional_norm(&self, f: &Field, s: f64) -> Result<f64> {
        let c = self.transform(f)?;
        Ok(fractional_norm_of_coeffs(&c, self.grid.cell_area(), s))
    }
}

pub(crate) fn fractional_norm_of_coeffs(c: &SpectralCoeffs, cell_area: f64, s: f64) -> f64 {
    let sum: f64 = c
        .coeffs
        .iter()
        .zip(c.eigenvalues())
        .map(|(&v, &l)| v * v * (1.0 + l).powf(2.0 * s))
        .sum();
    (sum * cell_area).sqrt()
}

/// Dual (V_0') norm of a zero-mean field from its coefficients:
/// ||xi||_*^2 = <xi, N xi> = Sum_{k != 0} c_k^2 / lambda_k.
pub(crate) fn dual_star_of_coeffs(c: &SpectralCoeffs, cell_area: f64) -> f64 {
    let sum: f64 = c
        .coeffs
        .iter()
        .zip(c.eigenvalues())
        .skip(1)
        .map(|(&v, &l)| v * v / l)
        .sum();
    (sum * cell_area).sqrt()
}
