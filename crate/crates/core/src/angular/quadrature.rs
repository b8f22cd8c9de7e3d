//! Tensor-product quadratures on the unit sphere: Gauss-Legendre in the
//! polar cosine times a uniform azimuthal rule.

use super::harmonics::{eval_all_sh, n_moments};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for l in 2..=n {
                let lf = l as f64;
                let p2 = ((2.0 * lf - 1.0) * x * p1 - (lf - 1.0) * p0) / lf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// A quadrature set together with its nodal-to-moment map.
#[derive(Debug, Clone)]
pub struct Quadrature {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    degree: usize,
    /// `samples[(q, k)] = m_k(Omega_q)`
    samples: DMatrix<f64>,
    /// `t_m[(q, k)] = w_q m_k(Omega_q)`
    t_m: DMatrix<f64>,
}

impl Quadrature {
    fn new(points: Vec<[f64; 3]>, weights: Vec<f64>, degree: usize) -> Self {
        let m = n_moments(degree);
        let nq = points.len();
        let mut samples = DMatrix::zeros(nq, m);
        let mut row = vec![0.0; m];
        for (q, o) in points.iter().enumerate() {
            eval_all_sh(degree, *o, &mut row);
            for k in 0..m {
                samples[(q, k)] = row[k];
            }
        }
        let mut t_m = samples.clone();
        for (q, w) in weights.iter().enumerate() {
            t_m.row_mut(q).scale_mut(*w);
        }
        Self {
            points,
            weights,
            degree,
            samples,
            t_m,
        }
    }

    pub fn n_q(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Harmonic degree the moment maps were built for.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `n_q x m` matrix of harmonic values at the nodes.
    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    /// `n_q x m` nodal-to-moment matrix: a nodal field `psi` (`n_x x n_q`) has moments `psi * T_M`.
    pub fn t_m(&self) -> &DMatrix<f64> {
        &self.t_m
    }

    /// Reorders the nodes; used to check permutation invariance of derived quantities.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n_q());
        let points = perm.iter().map(|&p| self.points[p]).collect();
        let weights = perm.iter().map(|&p| self.weights[p]).collect();
        Self::new(points, weights, self.degree)
    }

    /// CSV export: header lines start with `#`, then one `omega_x,omega_y,omega_z,weight` row per node.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# quadrature n_q = {}", self.n_q());
        let _ = writeln!(s, "omega_x,omega_y,omega_z,weight");
        for (o, w) in self.points.iter().zip(&self.weights) {
            let _ = writeln!(s, "{:e},{:e},{:e},{:e}", o[0], o[1], o[2], w);
        }
        s
    }
}

/// Orthonormal frame `(e1, e2, d)` with `d` as pole. For `d = z` this is the identity frame.
fn frame(d: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidArgument("beam direction must be a nonzero vector".into()));
    }
    let d = [d[0] / norm, d[1] / norm, d[2] / norm];
    // axis least aligned with d
    let mut axis = 0;
    for a in 1..3 {
        if d[a].abs() < d[axis].abs() {
            axis = a;
        }
    }
    let mut a = [0.0; 3];
    a[axis] = 1.0;
    let dot = d[axis];
    let mut e1 = [a[0] - dot * d[0], a[1] - dot * d[1], a[2] - dot * d[2]];
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|v| *v /= n1);
    let e2 = [
        d[1] * e1[2] - d[2] * e1[1],
        d[2] * e1[0] - d[0] * e1[2],
        d[0] * e1[1] - d[1] * e1[0],
    ];
    Ok([e1, e2, d])
}

fn tensor_points(order: usize, pole: [f64; 3], min_cos: f64) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    if order < 2 {
        return Err(Error::InvalidArgument(format!("quadrature order {order} < 2")));
    }
    let [e1, e2, d] = frame(pole)?;
    let (mu, wmu) = gauss_legendre(order);
    let n_phi = 2 * order;
    let dphi = 2.0 * PI / n_phi as f64;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (&m, &w) in mu.iter().zip(&wmu) {
        if m < min_cos {
            continue;
        }
        let s = (1.0 - m * m).sqrt();
        for j in 0..n_phi {
            let phi = (j as f64 + 0.5) * dphi;
            let (a, b) = (s * phi.cos(), s * phi.sin());
            points.push([
                a * e1[0] + b * e2[0] + m * d[0],
                a * e1[1] + b * e2[1] + m * d[1],
                a * e1[2] + b * e2[2] + m * d[2],
            ]);
            weights.push(w * dphi);
        }
    }
    Ok((points, weights))
}

/// Full tensor set with `order` polar and `2 * order` azimuthal nodes, moment maps up to `degree`.
/// Integrates spherical polynomials of degree up to `2 * order - 1` exactly.
pub fn build_quadrature(order: usize, degree: usize) -> Result<Quadrature> {
    let (points, weights) = tensor_points(order, [0.0, 0.0, 1.0], f64::NEG_INFINITY)?;
    Ok(Quadrature::new(points, weights, degree))
}

/// Tensor set built around `beam_dir` as pole, keeping only nodes with
/// `Omega . beam_dir >= cos(cone_half_angle)`. Weights are not renormalised.
pub fn build_directed_quadrature(
    order: usize,
    degree: usize,
    beam_dir: [f64; 3],
    cone_half_angle: f64,
) -> Result<Quadrature> {
    if !(cone_half_angle > 0.0 && cone_half_angle <= PI) {
        return Err(Error::InvalidArgument(format!(
            "cone half-angle {cone_half_angle} outside (0, pi]"
        )));
    }
    let min_cos = if cone_half_angle >= PI { f64::NEG_INFINITY } else { cone_half_angle.cos() };
    let (points, weights) = tensor_points(order, beam_dir, min_cos)?;
    if points.is_empty() {
        return Err(Error::EmptyQuadrature {
            half_angle: cone_half_angle,
            order,
        });
    }
    Ok(Quadrature::new(points, weights, degree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::harmonics::flat_index;

    #[test]
    fn gauss_legendre_small_orders() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(3);
        assert!(x[1].abs() < 1e-15);
        assert!((x[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(1);
        assert_eq!((x[0], w[0]), (0.0, 2.0));
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in [5, 22, 64, 128] {
            let (x, w) = gauss_legendre(n);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            for p in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let want = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
                assert!((got - want).abs() < 1e-13, "n={n} p={p}: {got}");
            }
        }
    }

    #[test]
    fn full_set_at_default_order() {
        let q = build_quadrature(22, 21).unwrap();
        assert_eq!(q.n_q(), 968);
        assert!((q.weights().iter().sum::<f64>() - 4.0 * PI).abs() < 1e-10);
        for o in q.points() {
            assert!(((o[0] * o[0] + o[1] * o[1] + o[2] * o[2]).sqrt() - 1.0).abs() < 1e-12);
        }
        assert_eq!(q.t_m().shape(), (968, 484));
    }

    #[test]
    fn directed_beam_set_size() {
        let full = build_quadrature(22, 5).unwrap();
        let q = build_directed_quadrature(22, 5, [1.0, 0.0, 0.0], 75f64.to_radians()).unwrap();
        assert_eq!(q.n_q(), 396);
        assert!(1.0 - q.n_q() as f64 / full.n_q() as f64 > 0.59);
        let cmin = 75f64.to_radians().cos();
        assert!(q.points().iter().all(|o| o[0] >= cmin));
    }

    #[test]
    fn full_cone_reproduces_full_set() {
        let full = build_quadrature(8, 3).unwrap();
        let q = build_directed_quadrature(8, 3, [0.0, 0.0, 1.0], PI).unwrap();
        assert_eq!(q.points(), full.points());
        assert_eq!(q.weights(), full.weights());
    }

    #[test]
    fn narrow_cone_is_empty() {
        let err = build_directed_quadrature(4, 1, [0.0, 1.0, 0.0], 1e-3).unwrap_err();
        assert!(matches!(err, Error::EmptyQuadrature { .. }));
    }

    #[test]
    fn tilted_frame_still_integrates_harmonics() {
        let q = build_directed_quadrature(6, 4, [0.3, -0.5, 0.8], PI).unwrap();
        // column sums of T_M are integrals of each harmonic: only m_0^0 survives
        for k in 0..q.t_m().ncols() {
            let s: f64 = q.t_m().column(k).iter().sum();
            let want = if k == 0 { (4.0 * PI).sqrt() } else { 0.0 };
            assert!((s - want).abs() < 1e-12, "k={k}: {s}");
        }
    }

    #[test]
    fn moment_round_trip() {
        let n = 5;
        let q = build_quadrature(n + 1, n).unwrap();
        let m = n_moments(n);
        // psi sampled from a moment vector of degree <= n is mapped back exactly
        let u = DMatrix::from_fn(3, m, |i, k| ((i + 1) * (k + 2)) as f64 * 0.01 - 0.1);
        let psi = &u * q.samples().transpose();
        let back = &psi * q.t_m();
        assert!((back - &u).norm() < 1e-10 * u.norm());
        assert_eq!(flat_index(0, 0), 0);
    }

    #[test]
    fn nodal_map_norm_bound() {
        let q = build_quadrature(4, 3).unwrap();
        let svd = q.t_m().clone().svd(false, false);
        let wmax = q.weights().iter().cloned().fold(0.0, f64::max);
        assert!(svd.singular_values.max() <= wmax.sqrt() + 1e-12);
    }
}
