use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::angular::{build_directed_quadrature, build_quadrature};
use crate::error::{Error, Result};
use crate::grid::{build_grid, uniform_grid, BoundaryMode, Grid2D};
use crate::physics::{ct_to_density, BeamModel, CrossSectionModel, EnergyFunction, GrayImage, RHO_BONE, RHO_MIN};
use crate::solver::Problem;

/// Width of the smoothed line-source pulse.
pub const LINE_SOURCE_SIGMA: f64 = 0.03;

/// Above this many unknowns per factor a setup is reported as slow.
const SLOW_UNKNOWNS: usize = 16_000_000;

/// Line-source benchmark: unit density on `[-1.5, 1.5]^2`, unit isotropic
/// scattering, a Gaussian pulse of width [`LINE_SOURCE_SIGMA`] in every
/// direction at `t = 0`.
#[derive(Debug, Clone)]
pub struct LineSourceSetup {
    pub problem: Problem,
    /// Initial uncollided density, `n_x x n_q`.
    pub psi0: DMatrix<f64>,
    /// Set when `n_x max(m, n_q)` is large enough that a march takes hours.
    pub slow: bool,
}

/// Pulse `exp(-r^2 / (4 sigma^2)) / (4 pi sigma^2)` at the cell centres,
/// copied into `n_q` direction columns.
pub fn line_source_density(grid: &Grid2D, n_q: usize) -> DMatrix<f64> {
    let s2 = LINE_SOURCE_SIGMA * LINE_SOURCE_SIGMA;
    DMatrix::from_fn(grid.n_cells(), n_q, |k, _| {
        let (x, y) = grid.cell_center(k);
        (-(x * x + y * y) / (4.0 * s2)).exp() / (4.0 * PI * s2)
    })
}

/// Whether `linesource_setup(n, degree, quad_order)` is flagged slow; cheap
/// enough to ask before anything is allocated.
pub fn linesource_is_slow(n: usize, degree: usize, quad_order: usize) -> bool {
    let n_q = 2 * quad_order * quad_order;
    n.saturating_mul(n).saturating_mul((degree + 1).pow(2).max(n_q)) > SLOW_UNKNOWNS
}

/// `n x n` cells, moment degree `degree`, tensor quadrature of `quad_order`.
pub fn linesource_setup(n: usize, degree: usize, quad_order: usize) -> Result<LineSourceSetup> {
    let grid = uniform_grid(n, -1.5, 1.5, 1.0, BoundaryMode::DirichletGhost)?;
    let quadrature = build_quadrature(quad_order, degree)?;
    let psi0 = line_source_density(&grid, quadrature.n_q());
    debug_assert_eq!(quadrature.n_q(), 2 * quad_order * quad_order);
    let slow = linesource_is_slow(n, degree, quad_order);
    let problem = Problem::new(grid, degree, quadrature, CrossSectionModel::line_source(), None)?;
    Ok(LineSourceSetup { problem, psi0, slow })
}

/// Parameters of a CT-based beam problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LungParams {
    /// Pixel edge length in cm.
    pub cell_size: f64,
    /// Lower-left corner of the image.
    pub origin: (f64, f64),
    pub degree: usize,
    pub quad_order: usize,
    /// Half opening angle (radians) of the directed quadrature around the beam axis.
    pub cone_half_angle: f64,
    pub beam: BeamModel,
    pub cross_sections: CrossSectionModel,
    /// See [`ct_to_density`].
    pub air_fill: Option<(f64, f64)>,
    pub rho_floor: f64,
}

impl LungParams {
    /// Image `width` pixels across 14.5 cm, beam entering at the top and
    /// travelling in `-y`, water-like stand-in cross sections.
    pub fn reference(width: usize, degree: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidArgument("image width is zero".into()));
        }
        let beam = BeamModel::reference([0.0, -1.0, 0.0])?;
        Ok(Self {
            cell_size: 14.5 / width as f64,
            origin: (0.0, 0.0),
            degree,
            quad_order: 22,
            cone_half_angle: 75f64.to_radians(),
            cross_sections: Self::standin_cross_sections(beam.e_max, 2.0, 1.0, 0.9)?,
            beam,
            air_fill: None,
            rho_floor: RHO_MIN,
        })
    }

    /// Constant stopping power `s`, Henyey-Greenstein scattering of
    /// magnitude `c` and anisotropy `g`, cutoff at `1e-3 E_max`.
    pub fn standin_cross_sections(e_max: f64, s: f64, c: f64, g: f64) -> Result<CrossSectionModel> {
        CrossSectionModel::new(
            EnergyFunction::Constant(s),
            EnergyFunction::Constant(c),
            EnergyFunction::Constant(g),
            e_max,
            1e-3 * e_max,
        )
    }
}

/// Problem on the density map of `image` with the beam as inflow. The
/// initial state is empty (zero uncollided density).
pub fn lung_setup(image: &GrayImage, params: &LungParams) -> Result<Problem> {
    let rho = ct_to_density(image, RHO_BONE, RHO_MIN, params.air_fill)?;
    beam_problem(image.width, image.height, &rho, params)
}

/// Beam problem on an `nx x ny` density field in flat grid order.
pub fn beam_problem(nx: usize, ny: usize, rho: &[f64], params: &LungParams) -> Result<Problem> {
    let grid = build_grid(
        nx,
        ny,
        params.cell_size,
        params.cell_size,
        params.origin,
        rho,
        BoundaryMode::DirichletGhost,
        params.rho_floor,
    )?;
    let quadrature =
        build_directed_quadrature(params.quad_order, params.degree, params.beam.axis, params.cone_half_angle)?;
    Problem::new(
        grid,
        params.degree,
        quadrature,
        params.cross_sections.clone(),
        Some(params.beam.clone()),
    )
}

/// Gray image whose columns left of `split_col` are 0 (lowest density) and 1 elsewhere.
pub fn layered_phantom(width: usize, height: usize, split_col: usize) -> Result<GrayImage> {
    let pixels = (0..height)
        .flat_map(|_| (0..width).map(move |c| if c < split_col { 0.0 } else { 1.0 }))
        .collect();
    GrayImage::new(width, height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_source_pulse_has_unit_mass() {
        let s = linesource_setup(100, 1, 4).unwrap();
        let g = &s.problem.grid;
        let mass: f64 = s.psi0.column(0).sum() * g.dx() * g.dy();
        // discrete mass of a well resolved Gaussian, 4 pi sigma^2 normalisation
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        assert!(!s.slow);
        assert!((s.psi0.column(0) - s.psi0.column(3)).norm() == 0.0);
    }

    #[test]
    fn phantom_maps_to_two_density_bands() {
        let img = layered_phantom(6, 4, 3).unwrap();
        let mut params = LungParams::reference(6, 1).unwrap();
        params.quad_order = 4;
        let p = lung_setup(&img, &params).unwrap();
        let g = &p.grid;
        assert_eq!((g.nx(), g.ny()), (6, 4));
        for k in 0..g.n_cells() {
            let (i, _) = g.cell_coords(k);
            let expect = if i < 3 { RHO_MIN } else { RHO_BONE };
            assert!((g.density()[k] - expect).abs() < 1e-14);
        }
        // directed set keeps only directions within the cone around -y
        let c = params.cone_half_angle.cos();
        assert!(p.quadrature.points().iter().all(|w| -w[1] >= c - 1e-12));
    }
}
