//! Real spherical harmonics `m_l^k` ordered as `(m_0^0, m_1^-1, m_1^0, m_1^1, ...)`.
//!
//! Directions are `Omega = (sin(theta) cos(phi), sin(theta) sin(phi), mu)` with
//! `mu = Omega_z`. The real combinations absorb the Condon-Shortley phase, so
//! the associated Legendre functions below carry no `(-1)^k` factor.

use crate::error::{Error, Result};
use std::f64::consts::{PI, SQRT_2};

/// Number of harmonics up to degree `n`.
pub fn n_moments(n: usize) -> usize {
    (n + 1) * (n + 1)
}

/// Flat 0-based index of `m_l^k`.
pub fn flat_index(l: usize, k: i64) -> usize {
    debug_assert!(k.unsigned_abs() as usize <= l);
    ((l * l + l) as i64 + k) as usize
}

/// Inverse of [`flat_index`].
pub fn degree_order(index: usize) -> (usize, i64) {
    let l = (index as f64).sqrt() as usize;
    // guard against rounding in the square root
    let l = if (l + 1) * (l + 1) <= index { l + 1 } else if l * l > index { l - 1 } else { l };
    (l, index as i64 - (l * l + l) as i64)
}

/// Fully normalised associated Legendre values `pbar[l][k]`, `0 <= k <= l <= n`,
/// such that `pbar_l^k(mu) cos(k phi)` (times `sqrt 2` for `k > 0`) is unit-normalised on the sphere.
fn normalized_legendre(n: usize, mu: f64, sin_theta: f64) -> Vec<Vec<f64>> {
    let mut p: Vec<Vec<f64>> = (0..=n).map(|l| vec![0.0; l + 1]).collect();
    p[0][0] = 1.0 / (4.0 * PI).sqrt();
    for k in 1..=n {
        let kf = k as f64;
        p[k][k] = ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * sin_theta * p[k - 1][k - 1];
    }
    for k in 0..n {
        p[k + 1][k] = (2.0 * k as f64 + 3.0).sqrt() * mu * p[k][k];
    }
    for k in 0..=n {
        for l in (k + 2)..=n {
            let (lf, kf) = (l as f64, k as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - kf * kf)).sqrt();
            let b = (((lf - 1.0).powi(2) - kf * kf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][k] = a * (mu * p[l - 1][k] - b * p[l - 2][k]);
        }
    }
    p
}

fn angles(omega: [f64; 3]) -> (f64, f64, f64) {
    let sin_theta = omega[0].hypot(omega[1]);
    let phi = omega[1].atan2(omega[0]);
    (omega[2], sin_theta, phi)
}

/// All harmonics up to degree `n` at `omega`, written into `out` (length `(n+1)^2`).
pub fn eval_all_sh(n: usize, omega: [f64; 3], out: &mut [f64]) {
    assert_eq!(out.len(), n_moments(n));
    let (mu, sin_theta, phi) = angles(omega);
    let p = normalized_legendre(n, mu, sin_theta);
    for l in 0..=n {
        out[flat_index(l, 0)] = p[l][0];
        for k in 1..=l {
            let (s, c) = (k as f64 * phi).sin_cos();
            out[flat_index(l, k as i64)] = SQRT_2 * p[l][k] * c;
            out[flat_index(l, -(k as i64))] = SQRT_2 * p[l][k] * s;
        }
    }
}

/// Single harmonic `m_l^k(omega)`.
pub fn eval_real_sh(l: usize, k: i64, omega: [f64; 3]) -> Result<f64> {
    if k.unsigned_abs() as usize > l {
        return Err(Error::HarmonicIndex {
            degree: l,
            order: k,
            max_degree: l,
        });
    }
    let (mu, sin_theta, phi) = angles(omega);
    let p = normalized_legendre(l, mu, sin_theta);
    let ka = k.unsigned_abs() as usize;
    Ok(match k {
        0 => p[l][0],
        k if k > 0 => SQRT_2 * p[l][ka] * (ka as f64 * phi).cos(),
        _ => SQRT_2 * p[l][ka] * (ka as f64 * phi).sin(),
    })
}

/// Legendre polynomials `P_0(mu) .. P_n(mu)` by the three-term recurrence.
pub fn legendre(n: usize, mu: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(mu);
    }
    for l in 2..=n {
        let lf = l as f64;
        let next = ((2.0 * lf - 1.0) * mu * p[l - 1] - (lf - 1.0) * p[l - 2]) / lf;
        p.push(next);
    }
    p
}
