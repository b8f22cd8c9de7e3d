//! Streaming operators: the moment flux `F` in factored and dense form, the
//! upwind sweep of the uncollided nodal density, and the CFL step size.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::angular::{PnBasis, Quadrature, ScatterDiagonal};
use crate::dlra::FactoredFlow;
use crate::error::{Error, Result};
use crate::grid::{Grid2D, Side, StencilSet};

/// `F(u) = L2x u Ax^T + L2y u Ay^T + L1x u |Ax| + L1y u |Ay|`.
#[derive(Debug, Clone, Copy)]
pub struct StreamingFlow<'a> {
    pub stencils: &'a StencilSet,
    pub basis: &'a PnBasis,
}

impl<'a> StreamingFlow<'a> {
    pub fn new(stencils: &'a StencilSet, basis: &'a PnBasis) -> Self {
        Self { stencils, basis }
    }

    /// Dense evaluation `F(u)` for an `n_x x m` matrix.
    pub fn apply_dense(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let (st, b) = (self.stencils, self.basis);
        let mut out = DMatrix::zeros(u.nrows(), u.ncols());
        st.l2x.mul_dense_acc(1.0, &(u * b.a_x.transpose()), &mut out);
        st.l2y.mul_dense_acc(1.0, &(u * b.a_y.transpose()), &mut out);
        st.l1x.mul_dense_acc(1.0, &(u * &b.abs_a_x), &mut out);
        st.l1y.mul_dense_acc(1.0, &(u * &b.abs_a_y), &mut out);
        out
    }

    fn projected_flux(&self, w_in: &DMatrix<f64>, w_out: &DMatrix<f64>) -> [DMatrix<f64>; 4] {
        let b = self.basis;
        [
            w_in.tr_mul(&(b.a_x.transpose() * w_out)),
            w_in.tr_mul(&(b.a_y.transpose() * w_out)),
            w_in.tr_mul(&(&b.abs_a_x * w_out)),
            w_in.tr_mul(&(&b.abs_a_y * w_out)),
        ]
    }

    fn projected_stencils(&self, x_out: &DMatrix<f64>, x_in: &DMatrix<f64>) -> [DMatrix<f64>; 4] {
        let st = self.stencils;
        [
            x_out.tr_mul(&st.l2x.mul_dense(x_in)),
            x_out.tr_mul(&st.l2y.mul_dense(x_in)),
            x_out.tr_mul(&st.l1x.mul_dense(x_in)),
            x_out.tr_mul(&st.l1y.mul_dense(x_in)),
        ]
    }
}

impl FactoredFlow for StreamingFlow<'_> {
    fn k_rhs(&self, k: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
        let st = self.stencils;
        let [ax, ay, bx, by] = self.projected_flux(w, w);
        let mut out = DMatrix::zeros(k.nrows(), w.ncols());
        st.l2x.mul_dense_acc(1.0, &(k * ax), &mut out);
        st.l2y.mul_dense_acc(1.0, &(k * ay), &mut out);
        st.l1x.mul_dense_acc(1.0, &(k * bx), &mut out);
        st.l1y.mul_dense_acc(1.0, &(k * by), &mut out);
        out
    }

    fn l_rhs(&self, x: &DMatrix<f64>, l: &DMatrix<f64>) -> DMatrix<f64> {
        let b = self.basis;
        let [l2x, l2y, l1x, l1y] = self.projected_stencils(x, x);
        l2x * l * b.a_x.transpose() + l2y * l * b.a_y.transpose() + l1x * l * &b.abs_a_x + l1y * l * &b.abs_a_y
    }

    fn s_rhs(
        &self,
        x_out: &DMatrix<f64>,
        x_in: &DMatrix<f64>,
        s: &DMatrix<f64>,
        w_in: &DMatrix<f64>,
        w_out: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let [l2x, l2y, l1x, l1y] = self.projected_stencils(x_out, x_in);
        let [ax, ay, bx, by] = self.projected_flux(w_in, w_out);
        l2x * s * ax + l2y * s * ay + l1x * s * bx + l1y * s * by
    }
}

/// Largest signal speed: the spectral radius of the flux matrices or, for the
/// nodal sweep, the largest direction cosine in the plane.
pub fn max_speed(basis: &PnBasis, quadrature: &Quadrature) -> f64 {
    quadrature
        .points()
        .iter()
        .map(|o| o[0].abs().max(o[1].abs()))
        .fold(basis.lambda_max(), f64::max)
}

/// `safety * rho_min * min(dx, dy) / (2 lambda)`, halved while some
/// self-scattering denominator `1 + dt Sigma_t - dt Sigma_kk` is not positive.
pub fn cfl_dt(grid: &Grid2D, basis: &PnBasis, quadrature: &Quadrature, sigma: &ScatterDiagonal, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::InvalidArgument(format!("CFL safety factor {safety} outside (0, 1]")));
    }
    let lambda = max_speed(basis, quadrature);
    let dt0 = safety * 0.5 * grid.min_density() * grid.dx().min(grid.dy()) / lambda;
    let mut dt = dt0;
    while sigma.self_scatter_factor(dt).is_err() {
        dt *= 0.5;
        if dt < 1e-14 * dt0 {
            return Err(Error::StepUnderflow(dt));
        }
    }
    Ok(dt)
}

/// One step for the uncollided nodal density `psi` (`n_x x n_q`): explicit
/// upwind streaming per direction, ghost inflow from `inflow(x, y, Omega)`,
/// then implicit out-scattering `psi / (1 + dt Sigma_t)`.
pub fn uncollided_step(
    psi: &DMatrix<f64>,
    grid: &Grid2D,
    stencils: &StencilSet,
    quadrature: &Quadrature,
    inflow: Option<&(dyn Fn(f64, f64, [f64; 3]) -> f64 + Sync)>,
    sigma_t: f64,
    dt: f64,
) -> Result<DMatrix<f64>> {
    let n_x = grid.n_cells();
    if psi.shape() != (n_x, quadrature.n_q()) {
        return Err(Error::DimensionMismatch {
            what: "uncollided density",
            expected: n_x * quadrature.n_q(),
            actual: psi.len(),
        });
    }
    let ghosts = if inflow.is_some() { grid.ghost_cells() } else { Vec::new() };
    let damping = 1.0 / (1.0 + dt * sigma_t);
    let mut out = psi.clone();
    out.as_mut_slice()
        .par_chunks_mut(n_x)
        .zip(quadrature.points().par_iter())
        .for_each(|(col, omega)| {
            let src = col.to_vec();
            let mut rhs = vec![0.0; n_x];
            let mut tmp = vec![0.0; n_x];
            let terms = [
                (&stencils.l2x, omega[0]),
                (&stencils.l1x, omega[0].abs()),
                (&stencils.l2y, omega[1]),
                (&stencils.l1y, omega[1].abs()),
            ];
            for (op, coeff) in terms {
                if coeff != 0.0 {
                    op.mul_vec_into(&src, &mut tmp);
                    rhs.iter_mut().zip(&tmp).for_each(|(r, t)| *r += coeff * t);
                }
            }
            if let Some(g) = inflow {
                for ghost in &ghosts {
                    let (t1, t2) = grid.ghost_weights(ghost.side);
                    let normal = match ghost.side {
                        Side::West | Side::East => omega[0],
                        Side::South | Side::North => omega[1],
                    };
                    let w = t1 * normal.abs() + t2 * normal;
                    if w != 0.0 {
                        rhs[ghost.cell] += w * g(ghost.x, ghost.y, *omega);
                    }
                }
            }
            for (c, r) in col.iter_mut().zip(&rhs) {
                *c = (*c + dt * r) * damping;
            }
        });
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("uncollided sweep"));
    }
    Ok(out)
}
