//! P_N flux matrices `A_i = int m m^T Omega_i dOmega` and their Roe matrices.

use super::harmonics::n_moments;
use super::quadrature::build_quadrature;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct PnBasis {
    degree: usize,
    pub a_x: DMatrix<f64>,
    pub a_y: DMatrix<f64>,
    pub abs_a_x: DMatrix<f64>,
    pub abs_a_y: DMatrix<f64>,
    pub v_x: DMatrix<f64>,
    pub lambda_x: DVector<f64>,
    pub v_y: DMatrix<f64>,
    pub lambda_y: DVector<f64>,
    lambda_max: f64,
}

impl PnBasis {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Basis size `m = (N + 1)^2`.
    pub fn m(&self) -> usize {
        n_moments(self.degree)
    }

    /// Largest eigenvalue modulus over both flux matrices.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// CSV dump of one flux matrix (`m` rows, `m` comma-separated columns).
    pub fn matrix_csv(a: &DMatrix<f64>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} x {} matrix, row-major", a.nrows(), a.ncols());
        for r in 0..a.nrows() {
            let row: Vec<String> = (0..a.ncols()).map(|c| format!("{:e}", a[(r, c)])).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// Eigendecomposition of a symmetric matrix with ascending eigenvalues and
/// deterministic signs: the largest-magnitude entry of each eigenvector is
/// positive, ties resolved by the lowest row index.
pub fn symmetric_eigen_sorted(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut v = DMatrix::zeros(n, n);
    let mut lambda = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        lambda[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for r in 1..n {
            // strict comparison keeps the lowest index on ties
            if col[r].abs() > col[pivot].abs() * (1.0 + 1e-12) {
                pivot = r;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        v.set_column(dst, &(col * sign));
    }
    (v, lambda)
}

/// Roe matrix `|A| = V |Lambda| V^T` together with `V` and `Lambda`.
pub fn roe_matrix(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let (v, lambda) = symmetric_eigen_sorted(a);
    let abs_l = DMatrix::from_diagonal(&lambda.map(f64::abs));
    let abs_a = &v * abs_l * v.transpose();
    let abs_a = (&abs_a + abs_a.transpose()) * 0.5;
    (abs_a, v, lambda)
}

pub fn build_pn_basis(degree: usize) -> Result<PnBasis> {
    if degree < 1 {
        return Err(Error::InvalidArgument("P_N degree must be at least 1".into()));
    }
    // order N + 2 integrates degree 2N + 3 >= 2N + 1 exactly
    let q = build_quadrature(degree + 2, degree)?;
    let samples = q.samples();
    let m = n_moments(degree);
    let mut a_x = DMatrix::zeros(m, m);
    let mut a_y = DMatrix::zeros(m, m);
    for (qi, (o, w)) in q.points().iter().zip(q.weights()).enumerate() {
        let row = samples.row(qi);
        let outer = row.transpose() * row;
        a_x += &outer * (w * o[0]);
        a_y += &outer * (w * o[1]);
    }
    let a_x = (&a_x + a_x.transpose()) * 0.5;
    let a_y = (&a_y + a_y.transpose()) * 0.5;
    let (abs_a_x, v_x, lambda_x) = roe_matrix(&a_x);
    let (abs_a_y, v_y, lambda_y) = roe_matrix(&a_y);
    let lambda_max = lambda_x.iter().chain(lambda_y.iter()).fold(0.0f64, |acc, l| acc.max(l.abs()));
    Ok(PnBasis {
        degree,
        a_x,
        a_y,
        abs_a_x,
        abs_a_y,
        v_x,
        lambda_x,
        v_y,
        lambda_y,
        lambda_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::flat_index;

    #[test]
    fn degree_one_coupling() {
        let b = build_pn_basis(1).unwrap();
        let i00 = flat_index(0, 0);
        let i11 = flat_index(1, 1);
        // int m00 m11 Omega_x = (1/sqrt(4 pi)) sqrt(3/(4 pi)) int Omega_x^2 = 1/sqrt(3)
        assert!((b.a_x[(i00, i11)].abs() - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((b.a_y[(i00, flat_index(1, -1))].abs() - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!(b.a_x[(i00, flat_index(1, 0))].abs() < 1e-14);
    }

    #[test]
    fn flux_matrices_symmetric_and_roe_consistent() {
        for n in [1, 3, 5, 7] {
            let b = build_pn_basis(n).unwrap();
            for (a, abs_a, v, l) in [
                (&b.a_x, &b.abs_a_x, &b.v_x, &b.lambda_x),
                (&b.a_y, &b.abs_a_y, &b.v_y, &b.lambda_y),
            ] {
                assert!((a - a.transpose()).norm() < 1e-12);
                let recon = v * DMatrix::from_diagonal(l) * v.transpose();
                assert!((recon - a).norm() < 1e-12);
                let eig = SymmetricEigen::new(abs_a.clone());
                assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-12));
                assert!(l.as_slice().windows(2).all(|p| p[0] <= p[1]));
            }
            assert!(b.lambda_max() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn roe_of_diagonal_matrix() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 0.5, 3.0, -0.25]));
        let (abs_a, _, _) = roe_matrix(&a);
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5, 3.0, 0.25]));
        assert!((abs_a - want).norm() < 1e-14);
    }

    #[test]
    fn eigenvector_signs_are_fixed() {
        let b = build_pn_basis(3).unwrap();
        for v in [&b.v_x, &b.v_y] {
            for c in 0..v.ncols() {
                let col = v.column(c);
                let big = col.iter().cloned().fold(0.0f64, |a, x| a.max(x.abs()));
                let first = col.iter().position(|x| x.abs() >= big * (1.0 - 1e-12)).unwrap();
                assert!(col[first] > 0.0);
            }
        }
        let again = build_pn_basis(3).unwrap();
        assert_eq!(b.abs_a_x, again.abs_a_x);
    }

    #[test]
    fn full_size_basis_speed_bound() {
        let b = build_pn_basis(21).unwrap();
        assert_eq!(b.m(), 484);
        assert!(b.lambda_max() <= 1.0 + 1e-12);
    }
}
