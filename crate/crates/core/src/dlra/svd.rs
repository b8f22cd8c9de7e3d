//! Thin SVD with descending singular values.

use faer::Mat;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `A = U diag(sigma) V^T` with `k = min(rows, cols)` columns in `U` and `V`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// Computed with faer: the bidiagonal QR of nalgebra loses accuracy on
/// rank-deficient inputs, which are the common case after basis augmentation.
pub fn thin_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    let (n, m) = a.shape();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("SVD input"));
    }
    let k = n.min(m);
    if k == 0 {
        return Ok(ThinSvd { u: DMatrix::zeros(n, 0), sigma: Vec::new(), v: DMatrix::zeros(m, 0) });
    }
    let f = Mat::<f64>::from_fn(n, m, |i, j| a[(i, j)]);
    let svd = f
        .thin_svd()
        .map_err(|e| Error::InvalidArgument(format!("SVD did not converge: {e:?}")))?;
    let (fu, fv, fs) = (svd.U(), svd.V(), svd.S().column_vector());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| fs[y].total_cmp(&fs[x]));
    let u = DMatrix::from_fn(n, k, |i, c| fu[(i, order[c])]);
    let v = DMatrix::from_fn(m, k, |i, c| fv[(i, order[c])]);
    let sigma = order.iter().map(|&c| fs[c]).collect();
    Ok(ThinSvd { u, sigma, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_deficient_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut random = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        for k in 0..300 {
            let r = 1 + k % 8;
            let (n, m) = if k % 2 == 0 { (30, 9) } else { (9, 9) };
            let a = random(n, r) * random(r, m) * 10f64.powi((k % 7) as i32 - 3);
            let s = thin_svd(&a).unwrap();
            let back = &s.u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s.sigma.clone())) * s.v.transpose();
            assert!((back - &a).norm() <= 1e-13 * a.norm(), "case {k}");
            assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
            assert!((s.u.tr_mul(&s.u) - DMatrix::identity(s.sigma.len(), s.sigma.len())).norm() < 1e-12);
        }
    }

    #[test]
    fn wide_and_empty() {
        let a = DMatrix::from_row_slice(2, 3, &[3.0, 0.0, 0.0, 0.0, 0.0, 4.0]);
        let s = thin_svd(&a).unwrap();
        assert_eq!(s.sigma.len(), 2);
        assert!((s.sigma[0] - 4.0).abs() < 1e-15 && (s.sigma[1] - 3.0).abs() < 1e-15);
        assert!(thin_svd(&DMatrix::from_element(1, 1, f64::NAN)).is_err());
    }
}
