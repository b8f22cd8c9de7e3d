use crate::angular::{build_pn_basis, PnBasis, Quadrature, ScatterDiagonal};
use crate::error::{Error, Result};
use crate::grid::{build_stencils, Grid2D, StencilSet};
use crate::physics::{BeamModel, CrossSectionModel};

/// Everything a march needs besides the state: mesh, operators and models.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid2D,
    pub stencils: StencilSet,
    pub basis: PnBasis,
    pub quadrature: Quadrature,
    pub cross_sections: CrossSectionModel,
    /// Inflow through the ghost cells of the uncollided sweep.
    pub beam: Option<BeamModel>,
}

impl Problem {
    pub fn new(
        grid: Grid2D,
        degree: usize,
        quadrature: Quadrature,
        cross_sections: CrossSectionModel,
        beam: Option<BeamModel>,
    ) -> Result<Self> {
        if quadrature.degree() != degree {
            return Err(Error::InvalidArgument(format!(
                "quadrature moment maps have degree {}, expected {degree}",
                quadrature.degree()
            )));
        }
        let stencils = build_stencils(&grid);
        let basis = build_pn_basis(degree)?;
        Ok(Self {
            grid,
            stencils,
            basis,
            quadrature,
            cross_sections,
            beam,
        })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn m(&self) -> usize {
        self.basis.m()
    }

    pub fn n_x(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn t_end(&self) -> f64 {
        self.cross_sections.t_end()
    }

    pub fn energy_at(&self, t: f64) -> Result<f64> {
        self.cross_sections.energy_of(t)
    }

    pub fn scatter_at(&self, t: f64) -> Result<ScatterDiagonal> {
        self.cross_sections.scatter_at(self.energy_at(t)?, self.degree())
    }

    pub fn stopping_at(&self, t: f64) -> Result<f64> {
        Ok(self.cross_sections.stopping_at(self.energy_at(t)?))
    }

    /// Ghost value `S(E) psi_in` seen by the uncollided sweep at pseudo-time `t`,
    /// i.e. the transformed inflow divided by the ghost density.
    pub fn inflow_at(&self, t: f64) -> Result<Option<impl Fn(f64, f64, [f64; 3]) -> f64 + Sync + '_>> {
        let Some(beam) = &self.beam else {
            return Ok(None);
        };
        let e = self.energy_at(t)?;
        let s = self.cross_sections.stopping_at(e);
        Ok(Some(move |x: f64, y: f64, omega: [f64; 3]| s * beam.eval(e, x, y, omega)))
    }
}
