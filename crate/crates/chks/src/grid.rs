//! Cell-centered 2D fields on a rectangle with homogeneous Neumann boundaries,
//! together with the stencil operators (gradient, divergence, Laplacian) and
//! midpoint quadrature.
//!
//! Sampling is cell-centered: node `(i, j)` sits at `((i + 1/2) hx, (j + 1/2) hy)`.
//! Neumann conditions are realized by mirrored ghost cells, which is equivalent
//! to zero normal flux on every boundary face.

use crate::error::{Error, Result};

/// Uniform cell-centered rectangular grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid {
    /// At least 4 cells per axis and positive edge lengths.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Grid> {
        if nx < 4 || ny < 4 {
            return Err(Error::Domain {
                what: "Grid::new",
                detail: format!("nx, ny must be >= 4 (got {nx} x {ny})"),
            });
        }
        if !(lx > 0.0) || !(ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::Domain {
                what: "Grid::new",
                detail: format!("Lx, Ly must be positive and finite (got {lx}, {ly})"),
            });
        }
        Ok(Grid { nx, ny, lx, ly })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Domain area |Ω|.
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Cell measure hx·hy.
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    /// x-coordinate of cell center i.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx()
    }

    /// y-coordinate of cell center j.
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy()
    }
}

/// Scalar samples on a grid, row-major (`values[j * nx + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Field {
        Field {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Field {
        Field::constant(grid, 0.0)
    }

    /// Sample a function of the cell-center coordinates.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Field { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain {
                what,
                detail: "field contains NaN or Inf".into(),
            })
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise map into a fresh field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// self + c * other.
    pub fn add_scaled(&self, other: &Field, c: f64) -> Result<Field> {
        check_same_grid(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn checked_sub(&self, other: &Field) -> Result<Field> {
        self.add_scaled(other, -1.0)
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn shift(&mut self, c: f64) {
        for v in &mut self.values {
            *v += c;
        }
    }
}

pub fn check_same_grid(a: &Field, b: &Field) -> Result<()> {
    if a.grid() == b.grid() {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{:?} vs {:?}",
            a.grid(),
            b.grid()
        )))
    }
}

/// Face-normal values on the staggered face grid. `x_faces` holds
/// `(nx+1) * ny` entries indexed `j * (nx+1) + i`; `y_faces` holds
/// `nx * (ny+1)` entries indexed `j * nx + i`. Boundary faces of an
/// admissible flux are zero (no-flux walls).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFlux {
    grid: Grid,
    pub x_faces: Vec<f64>,
    pub y_faces: Vec<f64>,
}

impl FaceFlux {
    pub fn zeros(grid: Grid) -> FaceFlux {
        FaceFlux {
            grid,
            x_faces: vec![0.0; (grid.nx + 1) * grid.ny],
            y_faces: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Largest absolute value on a boundary face.
    pub fn boundary_max_abs(&self) -> f64 {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut m = 0.0f64;
        for j in 0..ny {
            m = m.max(self.x_faces[j * (nx + 1)].abs());
            m = m.max(self.x_faces[j * (nx + 1) + nx].abs());
        }
        for i in 0..nx {
            m = m.max(self.y_faces[i].abs());
            m = m.max(self.y_faces[ny * nx + i].abs());
        }
        m
    }

    /// Pointwise scale every face value by the arithmetic face mean of `w`.
    /// Boundary faces stay zero, so admissibility is preserved.
    pub fn scale_by_face_mean(&mut self, w: &Field) -> Result<()> {
        if w.grid() != self.grid {
            return Err(Error::GridMismatch("flux/field grids differ".into()));
        }
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let v = w.values();
        for j in 0..ny {
            for i in 1..nx {
                self.x_faces[j * (nx + 1) + i] *= 0.5 * (v[j * nx + i - 1] + v[j * nx + i]);
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                self.y_faces[j * nx + i] *= 0.5 * (v[(j - 1) * nx + i] + v[j * nx + i]);
            }
        }
        Ok(())
    }
}

/// Spatial average `(1/|Ω|) Σ f_ij hx hy`, i.e. the plain mean of the samples.
/// Compensated summation keeps the drift of repeated re-centering near machine
/// precision over long runs.
pub fn mean(f: &Field) -> f64 {
    kahan_sum(f.values()) / f.grid().len() as f64
}

pub fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Midpoint-rule integral of a pointwise function of one field: Σ g(f_ij) hx hy.
pub fn integrate(f: &Field, g: impl Fn(f64) -> f64) -> f64 {
    let cell = f.grid().cell_area();
    let terms: Vec<f64> = f.values().iter().map(|&v| g(v)).collect();
    kahan_sum(&terms) * cell
}

/// L2 inner product ⟨f, g⟩ = Σ f g hx hy.
pub fn inner(f: &Field, g: &Field) -> Result<f64> {
    check_same_grid(f, g)?;
    let terms: Vec<f64> = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a * b)
        .collect();
    Ok(kahan_sum(&terms) * f.grid().cell_area())
}

/// Lp norm (midpoint quadrature), p >= 1.
pub fn lp_norm(f: &Field, p: f64) -> f64 {
    integrate(f, |v| v.abs().powf(p)).powf(1.0 / p)
}

pub fn l2_norm(f: &Field) -> f64 {
    integrate(f, |v| v * v).sqrt()
}

/// Face-normal differences of `f`: interior faces get `(f_r - f_l)/h`,
/// boundary faces are zero (mirrored ghosts make the normal derivative vanish).
pub fn face_gradient(f: &Field) -> FaceFlux {
    let grid = f.grid();
    let (nx, ny) = (grid.nx, grid.ny);
    let (hx, hy) = (grid.hx(), grid.hy());
    let v = f.values();
    let mut flux = FaceFlux::zeros(grid);
    for j in 0..ny {
        for i in 1..nx {
            flux.x_faces[j * (nx + 1) + i] = (v[j * nx + i] - v[j * nx + i - 1]) / hx;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            flux.y_faces[j * nx + i] = (v[j * nx + i] - v[(j - 1) * nx + i]) / hy;
        }
    }
    flux
}

/// Discrete divergence of a face flux. Rejects fluxes with nonzero boundary
/// faces: global conservation (zero output mean) relies on no-flux walls.
pub fn divergence(flux: &FaceFlux) -> Result<Field> {
    let b = flux.boundary_max_abs();
    if b != 0.0 {
        return Err(Error::Precondition(format!(
            "divergence requires zero boundary faces (max |boundary| = {b:.3e})"
        )));
    }
    Ok(divergence_unchecked(flux))
}

fn divergence_unchecked(flux: &FaceFlux) -> Field {
    let grid = flux.grid();
    let (nx, ny) = (grid.nx, grid.ny);
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut out = Field::zeros(grid);
    let v = out.values_mut();
    for j in 0..ny {
        for i in 0..nx {
            let dx = (flux.x_faces[j * (nx + 1) + i + 1] - flux.x_faces[j * (nx + 1) + i]) / hx;
            let dy = (flux.y_faces[(j + 1) * nx + i] - flux.y_faces[j * nx + i]) / hy;
            v[j * nx + i] = dx + dy;
        }
    }
    out
}

/// Five-point Neumann Laplacian with mirrored ghost cells, computed as
/// div(face_gradient(f)) so the composition identity is exact by construction.
pub fn laplacian_neumann(f: &Field) -> Field {
    divergence_unchecked(&face_gradient(f))
}

/// Squared discrete H1 seminorm: Σ over interior faces of |face gradient|² hx hy.
/// This is the quadrature under which summation by parts is exact:
/// Σ Δf·g hx hy = −Σ faces ∇f·∇g hx hy.
pub fn grad_norm_sq(f: &Field) -> f64 {
    let flux = face_gradient(f);
    face_dot(&flux, &flux)
}

/// Face-wise inner product Σ(a·b) hx hy over all faces.
pub fn face_dot(a: &FaceFlux, b: &FaceFlux) -> f64 {
    debug_assert_eq!(a.grid(), b.grid());
    let cell = a.grid().cell_area();
    let tx: Vec<f64> = a
        .x_faces
        .iter()
        .zip(&b.x_faces)
        .map(|(p, q)| p * q)
        .collect();
    let ty: Vec<f64> = a
        .y_faces
        .iter()
        .zip(&b.y_faces)
        .map(|(p, q)| p * q)
        .collect();
    (kahan_sum(&tx) + kahan_sum(&ty)) * cell
}

/// Cell-centered gradient components, each the average of the two adjacent
/// face values. Used for pointwise quantities like |∇v|².
pub fn cell_gradient(f: &Field) -> (Field, Field) {
    let grid = f.grid();
    let (nx, ny) = (grid.nx, grid.ny);
    let flux = face_gradient(f);
    let mut gx = Field::zeros(grid);
    let mut gy = Field::zeros(grid);
    for j in 0..ny {
        for i in 0..nx {
            gx.values_mut()[j * nx + i] =
                0.5 * (flux.x_faces[j * (nx + 1) + i] + flux.x_faces[j * (nx + 1) + i + 1]);
            gy.values_mut()[j * nx + i] =
                0.5 * (flux.y_faces[j * nx + i] + flux.y_faces[(j + 1) * nx + i]);
        }
    }
    (gx, gy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> Field {
        let values = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Field::new(grid, values).unwrap()
    }

    #[test]
    fn grid_rejects_small_and_degenerate() {
        assert!(Grid::new(3, 8, 1.0, 1.0).is_err());
        assert!(Grid::new(8, 8, 0.0, 1.0).is_err());
        assert!(Grid::new(8, 8, 1.0, -2.0).is_err());
        assert!(Grid::new(4, 4, 1.0, 1.0).is_ok());
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let grid = Grid::new(8, 8, 1.0, 2.0).unwrap();
        let f = Field::constant(grid, 7.0);
        let lap = laplacian_neumann(&f);
        assert_eq!(lap.max_abs(), 0.0);
    }

    #[test]
    fn laplacian_eigenmode_identity() {
        // f = cos(pi x / Lx) sampled cell-centered is a discrete eigenmode with
        // eigenvalue (2/hx^2)(1 - cos(pi/nx)).
        let grid = Grid::new(16, 8, 2.0, 1.0).unwrap();
        let f = Field::from_fn(grid, |x, _| (std::f64::consts::PI * x / grid.lx()).cos());
        let lap = laplacian_neumann(&f);
        let hx = grid.hx();
        let lam1 = (2.0 / (hx * hx)) * (1.0 - (std::f64::consts::PI / grid.nx() as f64).cos());
        let err = lap.add_scaled(&f, lam1).unwrap().max_abs();
        assert!(err < 1e-12 * lam1, "eigenmode defect {err}");
    }

    #[test]
    fn laplacian_mean_is_zero() {
        let grid = Grid::new(12, 10, 1.5, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let f = random_field(grid, &mut rng);
            let lap = laplacian_neumann(&f);
            // brute-force: every stencil contribution enters twice with opposite sign
            assert!(mean(&lap).abs() <= 1e-12 * l2_norm(&f).max(1.0));
        }
    }

    #[test]
    fn face_gradient_of_constant_is_zero() {
        let grid = Grid::new(8, 8, 1.0, 1.0).unwrap();
        let flux = face_gradient(&Field::constant(grid, 3.0));
        assert!(flux.x_faces.iter().all(|&v| v == 0.0));
        assert!(flux.y_faces.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn face_gradient_of_linear_field() {
        let grid = Grid::new(8, 8, 1.0, 1.0).unwrap();
        let slope = 2.5;
        let f = Field::from_fn(grid, |x, _| slope * x);
        let flux = face_gradient(&f);
        let nx = grid.nx();
        for j in 0..grid.ny() {
            for i in 0..=nx {
                let expect = if i == 0 || i == nx { 0.0 } else { slope };
                assert!((flux.x_faces[j * (nx + 1) + i] - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn divergence_of_gradient_is_laplacian_exactly() {
        let grid = Grid::new(10, 14, 1.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let f = random_field(grid, &mut rng);
            let lhs = divergence(&face_gradient(&f)).unwrap();
            let rhs = laplacian_neumann(&f);
            assert_eq!(lhs, rhs); // same arithmetic path, bit-exact
        }
    }

    #[test]
    fn divergence_rejects_nonzero_boundary() {
        let grid = Grid::new(8, 8, 1.0, 1.0).unwrap();
        let mut flux = FaceFlux::zeros(grid);
        flux.x_faces[0] = 1.0;
        assert!(divergence(&flux).is_err());
    }

    #[test]
    fn divergence_mean_zero_on_admissible_flux() {
        let grid = Grid::new(8, 8, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut flux = FaceFlux::zeros(grid);
        let nx = grid.nx();
        for j in 0..grid.ny() {
            for i in 1..nx {
                flux.x_faces[j * (nx + 1) + i] = rng.gen_range(-1.0..1.0);
            }
        }
        for j in 1..grid.ny() {
            for i in 0..nx {
                flux.y_faces[j * nx + i] = rng.gen_range(-1.0..1.0);
            }
        }
        let div = divergence(&flux).unwrap();
        assert!(mean(&div).abs() < 1e-12);
    }

    #[test]
    fn mean_of_constant_and_centering() {
        let grid = Grid::new(8, 8, 2.0, 2.0).unwrap();
        assert!((mean(&Field::constant(grid, 4.25)) - 4.25).abs() < 1e-15);
        let f = Field::from_fn(grid, |x, _| (std::f64::consts::PI * x / grid.lx()).cos());
        // cosine sum over cell centers telescopes to zero
        assert!(mean(&f).abs() < 1e-13);
        let mut g = f.clone();
        g.shift(-mean(&f));
        assert!(mean(&g).abs() < 1e-14);
    }

    #[test]
    fn summation_by_parts_is_exact() {
        let grid = Grid::new(12, 8, 1.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let f = random_field(grid, &mut rng);
            let g = random_field(grid, &mut rng);
            let lhs = inner(&laplacian_neumann(&f), &g).unwrap();
            let rhs = -face_dot(&face_gradient(&f), &face_gradient(&g));
            let scale = lhs.abs().max(rhs.abs()).max(1e-30);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * scale,
                "ibp defect {}",
                (lhs - rhs).abs()
            );
        }
    }
}
