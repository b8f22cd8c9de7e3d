//! Implicit scattering updates of the factored components.

use nalgebra::DMatrix;

use super::config::RankMode;
use crate::dlra::{augment_basis, orthonormalize, psi_l_step_scatter, truncate, LowRankFactors, TruncationInfo};
use crate::error::{Error, Result};

/// Particles scattering into a component: the uncollided density (nodal,
/// mapped to moments by `T_M`) or the previous level in factored form.
/// The scattering diagonal is applied by the methods below.
#[derive(Debug, Clone, Copy)]
pub enum ScatterSource<'a> {
    Nodal { psi: &'a DMatrix<f64>, t_m: &'a DMatrix<f64> },
    Factored(&'a LowRankFactors),
}

fn scale_rows(mut w: DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    for (mut row, s) in w.row_iter_mut().zip(d) {
        row *= *s;
    }
    w
}

fn scale_columns(mut a: DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    for (mut col, s) in a.column_iter_mut().zip(d) {
        col *= *s;
    }
    a
}

impl ScatterSource<'_> {
    /// `src Sigma W`.
    pub fn right(&self, sigma: &[f64], w: &DMatrix<f64>) -> DMatrix<f64> {
        let sw = scale_rows(w.clone(), sigma);
        match self {
            Self::Nodal { psi, t_m } => *psi * (*t_m * sw),
            Self::Factored(f) => &f.x * (&f.s * f.w.tr_mul(&sw)),
        }
    }

    /// `X^T src Sigma`.
    pub fn left(&self, sigma: &[f64], x: &DMatrix<f64>) -> DMatrix<f64> {
        let xs = match self {
            Self::Nodal { psi, t_m } => x.tr_mul(psi) * *t_m,
            Self::Factored(f) => x.tr_mul(&f.x) * &f.s * f.w.transpose(),
        };
        scale_columns(xs, sigma)
    }

    /// Dense `src Sigma`.
    pub fn dense(&self, sigma: &[f64]) -> DMatrix<f64> {
        let u = match self {
            Self::Nodal { psi, t_m } => *psi * *t_m,
            Self::Factored(f) => f.to_dense(),
        };
        scale_columns(u, sigma)
    }
}

fn check(f: LowRankFactors, what: &'static str) -> Result<LowRankFactors> {
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// In-scattering update of a component after streaming:
/// `u <- damping (u + dt src Sigma)` carried out as K, L and S substeps.
/// Levels use `damping = 1 / (1 + dt Sigma_t)`, the collided component 1.
pub fn scatter_update(
    f: &LowRankFactors,
    source: &ScatterSource,
    sigma: &[f64],
    dt: f64,
    damping: f64,
    mode: &RankMode,
) -> Result<(LowRankFactors, Option<TruncationInfo>)> {
    let k1 = (&f.x * &f.s + source.right(sigma, &f.w) * dt) * damping;
    let l1 = (&f.s * f.w.transpose() + source.left(sigma, &f.x) * dt) * damping;
    match mode {
        RankMode::Fixed { .. } => {
            let x1 = orthonormalize(&k1).q;
            let w1 = orthonormalize(&l1.transpose()).q;
            let s_tilde = x1.tr_mul(&f.x) * &f.s * f.w.tr_mul(&w1);
            let s1 = (s_tilde + x1.tr_mul(&source.right(sigma, &w1)) * dt) * damping;
            Ok((check(LowRankFactors { x: x1, s: s1, w: w1 }, "scattering step")?, None))
        }
        RankMode::Adaptive { policy, .. } => {
            let r = f.rank();
            let x_hat = augment_basis(&f.x, &k1, 2 * r);
            let w_hat = augment_basis(&f.w, &l1.transpose(), 2 * r);
            let mut s_hat = x_hat.tr_mul(&source.right(sigma, &w_hat)) * dt;
            s_hat.view_mut((0, 0), f.s.shape()).zip_apply(&f.s, |a, b| *a += b);
            s_hat *= damping;
            let (out, info) = truncate(&x_hat, &s_hat, &w_hat, policy)?;
            Ok((check(out, "scattering step")?, Some(info)))
        }
    }
}

/// Collided update: in-scattering from `source`, then the implicit
/// self-scattering L-step with `(I + dt Sigma_t - dt Sigma)^-1`.
pub fn scatter_update_collided(
    f: &LowRankFactors,
    source: Option<&ScatterSource>,
    sigma_t: f64,
    sigma: &[f64],
    dt: f64,
    mode: &RankMode,
) -> Result<(LowRankFactors, Option<TruncationInfo>)> {
    let (bar, info) = match source {
        Some(src) => scatter_update(f, src, sigma, dt, 1.0, mode)?,
        None => (f.clone(), None),
    };
    Ok((psi_l_step_scatter(&bar, sigma_t, sigma, dt)?, info))
}
