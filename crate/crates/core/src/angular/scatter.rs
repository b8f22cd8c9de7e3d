//! Diagonal in-scattering operator of a rotationally invariant kernel.
//!
//! The kernel `Sigma_s(mu)` depends only on the scattering cosine, so its
//! action on `m_l^k` is multiplication by the degree-`l` Legendre moment
//! `2 pi int P_l(mu) Sigma_s(mu) dmu`, shared by all orders `k` of that degree.

use super::harmonics::{degree_order, legendre, n_moments};
use super::quadrature::gauss_legendre;
use crate::error::{Error, Result};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterDiagonal {
    /// Legendre moments for degrees `0..=N`.
    per_degree: Vec<f64>,
}

impl ScatterDiagonal {
    /// Validates the bound `|Sigma_l| <= Sigma_0` and positivity of `Sigma_0`.
    pub fn from_degree_moments(per_degree: Vec<f64>) -> Result<Self> {
        if per_degree.is_empty() {
            return Err(Error::InvalidArgument("empty scattering moments".into()));
        }
        if per_degree.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scattering kernel"));
        }
        let s0 = per_degree[0];
        if !(s0 > 0.0) {
            return Err(Error::InvalidArgument(format!("total cross section {s0} is not positive")));
        }
        if let Some(l) = per_degree.iter().position(|v| v.abs() > s0 * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "scattering moment of degree {l} exceeds the total cross section"
            )));
        }
        Ok(Self { per_degree })
    }

    /// Henyey-Greenstein kernel `c/(4 pi) (1 - g^2) / (1 + g^2 - 2 g mu)^(3/2)`: moments `c g^l`.
    pub fn henyey_greenstein(c: f64, g: f64, degree: usize) -> Result<Self> {
        if !(g.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!("anisotropy {g} outside (-1, 1)")));
        }
        Self::from_degree_moments((0..=degree).map(|l| c * g.powi(l as i32)).collect())
    }

    pub fn isotropic(c: f64, degree: usize) -> Result<Self> {
        Self::henyey_greenstein(c, 0.0, degree)
    }

    pub fn degree(&self) -> usize {
        self.per_degree.len() - 1
    }

    pub fn per_degree(&self) -> &[f64] {
        &self.per_degree
    }

    /// Total cross section, equal to the zeroth moment.
    pub fn sigma_t(&self) -> f64 {
        self.per_degree[0]
    }

    /// The `m` diagonal entries in flat harmonic order.
    pub fn diag(&self) -> Vec<f64> {
        (0..n_moments(self.degree()))
            .map(|k| self.per_degree[degree_order(k).0])
            .collect()
    }

    pub fn max_entry(&self) -> f64 {
        self.per_degree.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_k 1 / (1 + dt Sigma_t - dt Sigma_kk)`; errors on a nonpositive denominator.
    pub fn self_scatter_factor(&self, dt: f64) -> Result<f64> {
        let st = self.sigma_t();
        let mut worst = 0.0f64;
        for (l, s) in self.per_degree.iter().enumerate() {
            let d = 1.0 + dt * st - dt * s;
            if !(d > 0.0) {
                return Err(Error::ScatterDenominator { index: l * l, value: d });
            }
            worst = worst.max(1.0 / d);
        }
        Ok(worst)
    }
}

/// Legendre moments of a tabulated-or-analytic kernel by Gauss-Legendre
/// quadrature with `max(2N + 2, 128)` nodes.
pub fn build_scatter_diagonal(kernel: &dyn Fn(f64) -> f64, degree: usize) -> Result<ScatterDiagonal> {
    let (mu, w) = gauss_legendre((2 * degree + 2).max(128));
    let mut per_degree = vec![0.0; degree + 1];
    for (&x, &wx) in mu.iter().zip(&w) {
        let k = kernel(x);
        if !k.is_finite() {
            return Err(Error::NonFinite("scattering kernel"));
        }
        for (acc, p) in per_degree.iter_mut().zip(legendre(degree, x)) {
            *acc += 2.0 * PI * wx * p * k;
        }
    }
    ScatterDiagonal::from_degree_moments(per_degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::flat_index;

    fn hg(c: f64, g: f64) -> impl Fn(f64) -> f64 {
        move |mu| c / (4.0 * PI) * (1.0 - g * g) / (1.0 + g * g - 2.0 * g * mu).powf(1.5)
    }

    #[test]
    fn isotropic_kernel_has_only_zeroth_moment() {
        let c = 2.5;
        let s = build_scatter_diagonal(&|_| c / (4.0 * PI), 6).unwrap();
        assert!((s.sigma_t() - c).abs() < 1e-13);
        assert!(s.per_degree()[1..].iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn henyey_greenstein_moments() {
        let s = build_scatter_diagonal(&hg(1.0, 0.5), 8).unwrap();
        let exact = ScatterDiagonal::henyey_greenstein(1.0, 0.5, 8).unwrap();
        for l in 0..=8 {
            assert!((s.per_degree()[l] - 0.5f64.powi(l as i32)).abs() < 1e-12, "l={l}");
            assert!((exact.per_degree()[l] - 0.5f64.powi(l as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn line_source_cross_section() {
        let s = ScatterDiagonal::isotropic(1.0, 7).unwrap();
        assert_eq!(s.sigma_t(), 1.0);
        assert_eq!(s.diag()[0], 1.0);
        assert_eq!(s.diag().len(), 64);
    }

    #[test]
    fn diagonal_uses_degree_of_each_harmonic() {
        let s = ScatterDiagonal::henyey_greenstein(2.0, 0.3, 3).unwrap();
        let d = s.diag();
        for l in 0..=3usize {
            for k in -(l as i64)..=l as i64 {
                assert!((d[flat_index(l, k)] - 2.0 * 0.3f64.powi(l as i32)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bad_kernels_are_rejected() {
        assert!(matches!(build_scatter_diagonal(&|_| f64::NAN, 2), Err(Error::NonFinite(_))));
        assert!(ScatterDiagonal::from_degree_moments(vec![1.0, 1.5]).is_err());
        assert!(ScatterDiagonal::from_degree_moments(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn self_scatter_factor_is_at_most_one_for_admissible_kernels() {
        let s = ScatterDiagonal::henyey_greenstein(5.0, -0.7, 5).unwrap();
        let f = s.self_scatter_factor(0.3).unwrap();
        assert!(f <= 1.0);
        assert_eq!(f, 1.0); // degree 0 entry equals the total cross section
    }
}
