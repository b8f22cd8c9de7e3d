use nalgebra::{DMatrix, DVector};

use super::svd::thin_svd;

use crate::error::{Error, Result};

/// `u = X S W^T` with `X` (`n_x x r`) and `W` (`m x q`) column-orthonormal.
/// `S` is square after a truncation but may be rectangular in between.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactors {
    pub x: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub w: DMatrix<f64>,
}

impl LowRankFactors {
    pub fn new(x: DMatrix<f64>, s: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        if s.nrows() != x.ncols() {
            return Err(Error::DimensionMismatch {
                what: "rows of S",
                expected: x.ncols(),
                actual: s.nrows(),
            });
        }
        if s.ncols() != w.ncols() {
            return Err(Error::DimensionMismatch {
                what: "columns of S",
                expected: w.ncols(),
                actual: s.ncols(),
            });
        }
        Ok(Self { x, s, w })
    }

    /// The zero function of rank `r`, spanned by the first `r` canonical vectors.
    pub fn zeros(n_x: usize, m: usize, r: usize) -> Self {
        let r = r.min(n_x).min(m).max(1);
        Self {
            x: DMatrix::identity(n_x, r),
            s: DMatrix::zeros(r, r),
            w: DMatrix::identity(m, r),
        }
    }

    /// Best rank-`r` approximation of a dense `n_x x m` matrix.
    pub fn from_dense(u: &DMatrix<f64>, r: usize) -> Result<Self> {
        let (n_x, m) = u.shape();
        let r = r.min(n_x).min(m).max(1);
        let svd = thin_svd(u)?;
        Ok(Self {
            x: svd.u.columns(0, r).into_owned(),
            s: DMatrix::from_diagonal(&DVector::from_column_slice(&svd.sigma[..r])),
            w: svd.v.columns(0, r).into_owned(),
        })
    }

    pub fn n_x(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    /// Rank of the representation, `max(rows, cols)` of `S`.
    pub fn rank(&self) -> usize {
        self.s.nrows().max(self.s.ncols())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.x * &self.s * self.w.transpose()
    }

    /// Frobenius norm of `u`, exact when the bases are orthonormal.
    pub fn norm(&self) -> f64 {
        self.s.norm()
    }

    /// Largest deviation of `X^T X` and `W^T W` from the identity (Frobenius).
    pub fn orthonormality_error(&self) -> f64 {
        let ex = (self.x.transpose() * &self.x - DMatrix::identity(self.x.ncols(), self.x.ncols())).norm();
        let ew = (self.w.transpose() * &self.w - DMatrix::identity(self.w.ncols(), self.w.ncols())).norm();
        ex.max(ew)
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.s.iter()).chain(self.w.iter()).all(|v| v.is_finite())
    }

    /// Column `c` of `u`, i.e. `X S (W^T e_c)`.
    pub fn column(&self, c: usize) -> Vec<f64> {
        let sw = &self.s * self.w.row(c).transpose();
        (&self.x * sw).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_are_orthonormal() {
        let f = LowRankFactors::zeros(10, 4, 3);
        assert_eq!(f.rank(), 3);
        assert_eq!(f.norm(), 0.0);
        assert!(f.orthonormality_error() == 0.0);
    }

    #[test]
    fn from_dense_reproduces_low_rank_matrix() {
        let a = DMatrix::from_fn(8, 5, |i, j| (i as f64 + 1.0) * (j as f64 - 2.0) + (i * j) as f64);
        let f = LowRankFactors::from_dense(&a, 2).unwrap();
        assert!((f.to_dense() - &a).norm() < 1e-12 * a.norm());
        assert!((f.norm() - a.norm()).abs() < 1e-12 * a.norm());
        assert!(f.s[(0, 0)] >= f.s[(1, 1)]);
        let col = f.column(3);
        assert!((0..8).all(|i| (col[i] - a[(i, 3)]).abs() < 1e-11));
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let x = DMatrix::identity(4, 2);
        let w = DMatrix::identity(3, 2);
        assert!(LowRankFactors::new(x.clone(), DMatrix::zeros(3, 2), w.clone()).is_err());
        assert!(LowRankFactors::new(x, DMatrix::zeros(2, 1), w).is_err());
    }
}
