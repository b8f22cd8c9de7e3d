//! Structured 2D mesh, density field, finite-volume stencils and the
//! Fourier machinery used for von Neumann stability checks.
//!
//! Cells are addressed by 0-based `(i, j)` with `i` along x and `j` along y.
//! The flat index is `i * ny + j`, so `j` runs fastest. This is the 0-based
//! form of the classical `idx(i, j) = (i - 1) * N + j` flattening.
//!
//! Stencil signs follow the semi-discrete operator: the streaming right-hand
//! side of the moment system is `L2x u Ax^T + L2y u Ay^T + L1x u |Ax| + L1y u |Ay|`
//! with `L = T diag(rho)^-1`, where `T1` is a (negative semi-definite) diffusion
//! stencil and `T2` the central advection stencil of `-d/dx`.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use nalgebra::{Complex, DMatrix};
use std::f64::consts::PI;

/// Largest grid accepted by [`build_fourier`].
pub const FOURIER_MAX_CELLS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Wrap-around neighbours; used by the stability analysis.
    Periodic,
    /// One layer of ghost cells; moment components see zero ghost values,
    /// the uncollided sweep sees the inflow density.
    DirichletGhost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    West,
    East,
    South,
    North,
}

/// A ghost cell adjacent to a boundary cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhostCell {
    /// Flat index of the interior cell the ghost feeds.
    pub cell: usize,
    pub side: Side,
    /// Ghost cell centre.
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    origin: (f64, f64),
    rho: Vec<f64>,
    boundary: BoundaryMode,
    floored_cells: usize,
}

impl Grid2D {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of cells `nx * ny`.
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn density(&self) -> &[f64] {
        &self.rho
    }

    pub fn boundary(&self) -> BoundaryMode {
        self.boundary
    }

    /// Number of cells raised to the density floor during construction.
    pub fn floored_cells(&self) -> usize {
        self.floored_cells
    }

    pub fn min_density(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// 0-based flat index of cell `(i, j)`.
    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        i * self.ny + j
    }

    /// Inverse of [`Grid2D::cell`].
    #[inline]
    pub fn cell_coords(&self, k: usize) -> (usize, usize) {
        (k / self.ny, k % self.ny)
    }

    /// 1-based flattening `idx(i, j) = (i - 1) * ny + j` for `i in 1..=nx`, `j in 1..=ny`.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        assert!((1..=self.nx).contains(&i) && (1..=self.ny).contains(&j));
        (i - 1) * self.ny + j
    }

    pub fn cell_center(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.cell_coords(k);
        (
            self.origin.0 + (i as f64 + 0.5) * self.dx,
            self.origin.1 + (j as f64 + 0.5) * self.dy,
        )
    }

    /// Ghost cells around the domain, in deterministic order (W, E, S, N).
    pub fn ghost_cells(&self) -> Vec<GhostCell> {
        let (x0, y0) = self.origin;
        let mut out = Vec::with_capacity(2 * (self.nx + self.ny));
        for j in 0..self.ny {
            let y = y0 + (j as f64 + 0.5) * self.dy;
            out.push(GhostCell {
                cell: self.cell(0, j),
                side: Side::West,
                x: x0 - 0.5 * self.dx,
                y,
            });
            out.push(GhostCell {
                cell: self.cell(self.nx - 1, j),
                side: Side::East,
                x: x0 + (self.nx as f64 + 0.5) * self.dx,
                y,
            });
        }
        for i in 0..self.nx {
            let x = x0 + (i as f64 + 0.5) * self.dx;
            out.push(GhostCell {
                cell: self.cell(i, 0),
                side: Side::South,
                x,
                y: y0 - 0.5 * self.dy,
            });
            out.push(GhostCell {
                cell: self.cell(i, self.ny - 1),
                side: Side::North,
                x,
                y: y0 + (self.ny as f64 + 0.5) * self.dy,
            });
        }
        out
    }

    /// Stencil weights `(t1, t2)` that a ghost on `side` carries into its cell.
    pub fn ghost_weights(&self, side: Side) -> (f64, f64) {
        match side {
            Side::West => (0.5 / self.dx, 0.5 / self.dx),
            Side::East => (0.5 / self.dx, -0.5 / self.dx),
            Side::South => (0.5 / self.dy, 0.5 / self.dy),
            Side::North => (0.5 / self.dy, -0.5 / self.dy),
        }
    }
}

/// Builds and validates a grid. Densities below `rho_floor` (including zero)
/// are raised to the floor; the count is available from
/// [`Grid2D::floored_cells`].
#[allow(clippy::too_many_arguments)]
pub fn build_grid(
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    origin: (f64, f64),
    density: &[f64],
    boundary: BoundaryMode,
    rho_floor: f64,
) -> Result<Grid2D> {
    if nx < 3 || ny < 3 {
        return Err(Error::InvalidGrid(format!(
            "need at least 3 cells per direction, got {nx} x {ny}"
        )));
    }
    if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "cell widths must be positive, got dx = {dx}, dy = {dy}"
        )));
    }
    if density.len() != nx * ny {
        return Err(Error::DimensionMismatch {
            what: "density field",
            expected: nx * ny,
            actual: density.len(),
        });
    }
    if !(rho_floor >= 0.0) {
        return Err(Error::InvalidGrid(format!("density floor {rho_floor} is negative")));
    }
    let mut floored = 0;
    let mut rho = Vec::with_capacity(density.len());
    for &value in density {
        if !value.is_finite() {
            return Err(Error::NonFinite("density field"));
        }
        if value < rho_floor {
            floored += 1;
            rho.push(rho_floor);
        } else {
            rho.push(value);
        }
    }
    if let Some(bad) = rho.iter().position(|&r| r <= 0.0) {
        return Err(Error::InvalidGrid(format!(
            "density at cell {bad} is not positive after flooring"
        )));
    }
    Ok(Grid2D {
        nx,
        ny,
        dx,
        dy,
        origin,
        rho,
        boundary,
        floored_cells: floored,
    })
}

/// Uniform-density helper for tests and benchmarks.
pub fn uniform_grid(n: usize, lo: f64, hi: f64, rho: f64, boundary: BoundaryMode) -> Result<Grid2D> {
    let h = (hi - lo) / n as f64;
    build_grid(n, n, h, h, (lo, lo), &vec![rho; n * n], boundary, 0.0)
}

/// Density-free stencils `T` and density-weighted stencils `L = T diag(rho)^-1`.
#[derive(Debug, Clone)]
pub struct StencilSet {
    pub t1x: CsrMatrix,
    pub t1y: CsrMatrix,
    pub t2x: CsrMatrix,
    pub t2y: CsrMatrix,
    pub l1x: CsrMatrix,
    pub l1y: CsrMatrix,
    pub l2x: CsrMatrix,
    pub l2y: CsrMatrix,
}

pub fn build_stencils(grid: &Grid2D) -> StencilSet {
    let (nx, ny) = (grid.nx, grid.ny);
    let n = grid.n_cells();
    let periodic = grid.boundary == BoundaryMode::Periodic;
    let (hx, hy) = (grid.dx, grid.dy);

    let mut t1x = Vec::with_capacity(3 * n);
    let mut t2x = Vec::with_capacity(2 * n);
    let mut t1y = Vec::with_capacity(3 * n);
    let mut t2y = Vec::with_capacity(2 * n);

    let neighbour = |k: usize, len: usize, step: isize| -> Option<usize> {
        let target = k as isize + step;
        if (0..len as isize).contains(&target) {
            Some(target as usize)
        } else if periodic {
            Some(target.rem_euclid(len as isize) as usize)
        } else {
            None
        }
    };

    for i in 0..nx {
        for j in 0..ny {
            let row = grid.cell(i, j);
            t1x.push((row, row, -1.0 / hx));
            t1y.push((row, row, -1.0 / hy));
            if let Some(im) = neighbour(i, nx, -1) {
                let col = grid.cell(im, j);
                t1x.push((row, col, 0.5 / hx));
                t2x.push((row, col, 0.5 / hx));
            }
            if let Some(ip) = neighbour(i, nx, 1) {
                let col = grid.cell(ip, j);
                t1x.push((row, col, 0.5 / hx));
                t2x.push((row, col, -0.5 / hx));
            }
            if let Some(jm) = neighbour(j, ny, -1) {
                let col = grid.cell(i, jm);
                t1y.push((row, col, 0.5 / hy));
                t2y.push((row, col, 0.5 / hy));
            }
            if let Some(jp) = neighbour(j, ny, 1) {
                let col = grid.cell(i, jp);
                t1y.push((row, col, 0.5 / hy));
                t2y.push((row, col, -0.5 / hy));
            }
        }
    }

    let t1x = CsrMatrix::from_triplets(n, n, &t1x);
    let t1y = CsrMatrix::from_triplets(n, n, &t1y);
    let t2x = CsrMatrix::from_triplets(n, n, &t2x);
    let t2y = CsrMatrix::from_triplets(n, n, &t2y);
    let inv_rho: Vec<f64> = grid.rho.iter().map(|r| 1.0 / r).collect();
    StencilSet {
        l1x: t1x.scale_columns(&inv_rho),
        l1y: t1y.scale_columns(&inv_rho),
        l2x: t2x.scale_columns(&inv_rho),
        l2y: t2y.scale_columns(&inv_rho),
        t1x,
        t1y,
        t2x,
        t2y,
    }
}

/// Fourier modes diagonalising the periodic stencils: `T E = E D`.
#[derive(Debug, Clone)]
pub struct FourierDiag {
    /// Unitary mode matrix, column `cell(a, b)` holds mode `(a, b)`.
    pub modes: DMatrix<Complex<f64>>,
    pub d1x: Vec<Complex<f64>>,
    pub d1y: Vec<Complex<f64>>,
    pub d2x: Vec<Complex<f64>>,
    pub d2y: Vec<Complex<f64>>,
}

pub fn build_fourier(grid: &Grid2D) -> Result<FourierDiag> {
    if grid.boundary != BoundaryMode::Periodic {
        return Err(Error::NotPeriodic);
    }
    let n = grid.n_cells();
    if n > FOURIER_MAX_CELLS {
        return Err(Error::GridTooLarge {
            n_cells: n,
            limit: FOURIER_MAX_CELLS,
        });
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let scale = 1.0 / (n as f64).sqrt();
    let modes = DMatrix::from_fn(n, n, |row, col| {
        let (l, k) = grid.cell_coords(row);
        let (a, b) = grid.cell_coords(col);
        let phase = 2.0 * PI * ((a * l) as f64 / nx as f64 + (b * k) as f64 / ny as f64);
        Complex::from_polar(scale, phase)
    });
    let mut d1x = Vec::with_capacity(n);
    let mut d1y = Vec::with_capacity(n);
    let mut d2x = Vec::with_capacity(n);
    let mut d2y = Vec::with_capacity(n);
    for col in 0..n {
        let (a, b) = grid.cell_coords(col);
        let theta_x = 2.0 * PI * a as f64 / nx as f64;
        let theta_y = 2.0 * PI * b as f64 / ny as f64;
        d1x.push(Complex::new((theta_x.cos() - 1.0) / grid.dx, 0.0));
        d1y.push(Complex::new((theta_y.cos() - 1.0) / grid.dy, 0.0));
        d2x.push(Complex::new(0.0, -theta_x.sin() / grid.dx));
        d2y.push(Complex::new(0.0, -theta_y.sin() / grid.dy));
    }
    Ok(FourierDiag {
        modes,
        d1x,
        d1y,
        d2x,
        d2y,
    })
}

/// Per-mode streaming symbol `1/2 + nu (cos theta - 1) - i nu sin theta`.
pub fn streaming_symbol(nu: f64, theta: f64) -> Complex<f64> {
    Complex::new(0.5 + nu * (theta.cos() - 1.0), -nu * theta.sin())
}

/// One-direction amplification factor of the explicit upwind step, i.e.
/// twice the modulus of [`streaming_symbol`].
pub fn amplification(nu: f64, theta: f64) -> f64 {
    2.0 * streaming_symbol(nu, theta).norm()
}
