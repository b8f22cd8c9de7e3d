//! Basis-update & Galerkin steps (fixed rank and rank adaptive), truncation,
//! and the implicit projector-splitting L-step for self-scattering.

use nalgebra::DMatrix;

use super::factors::LowRankFactors;
use super::orth::{augment_basis, orthonormalize};
use super::svd::thin_svd;
use crate::error::{Error, Result};

/// Right-hand side `F` of `du/dt = F(u)` evaluated in factored form.
pub trait FactoredFlow: Sync {
    /// `F(K W^T) W`.
    fn k_rhs(&self, k: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64>;
    /// `X^T F(X L)` for `L` of shape `r x m`.
    fn l_rhs(&self, x: &DMatrix<f64>, l: &DMatrix<f64>) -> DMatrix<f64>;
    /// `X_out^T F(X_in S W_in^T) W_out`.
    fn s_rhs(
        &self,
        x_out: &DMatrix<f64>,
        x_in: &DMatrix<f64>,
        s: &DMatrix<f64>,
        w_in: &DMatrix<f64>,
        w_out: &DMatrix<f64>,
    ) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationMode {
    /// Discard singular values whose tail norm is at most `theta`.
    Absolute,
    /// Same with `theta * ||S_hat||_F`.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub mode: TruncationMode,
    pub theta: f64,
    pub r_min: usize,
    pub r_max: usize,
}

impl TruncationPolicy {
    pub fn relative(theta: f64, r_min: usize, r_max: usize) -> Self {
        Self { mode: TruncationMode::Relative, theta, r_min, r_max }
    }

    pub fn absolute(theta: f64, r_min: usize, r_max: usize) -> Self {
        Self { mode: TruncationMode::Absolute, theta, r_min, r_max }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidArgument(format!("truncation tolerance {} must be nonnegative", self.theta)));
        }
        if self.r_min == 0 || self.r_min > self.r_max {
            return Err(Error::InvalidArgument(format!(
                "rank bounds must satisfy 1 <= r_min <= r_max, got {} and {}",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    /// Absolute tolerance for a coefficient matrix of Frobenius norm `s_norm`.
    pub fn threshold(&self, s_norm: f64) -> f64 {
        match self.mode {
            TruncationMode::Absolute => self.theta,
            TruncationMode::Relative => self.theta * s_norm,
        }
    }
}

/// Outcome of a truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationInfo {
    /// Descending singular values of the augmented coefficient matrix.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    /// Norm of the discarded tail.
    pub discarded: f64,
    pub rank: usize,
}

/// Smallest `r` whose singular value tail is at most `threshold`, clamped to
/// `[r_min, r_max]` and the number of available values.
pub fn select_rank(sigma: &[f64], threshold: f64, r_min: usize, r_max: usize) -> usize {
    let mut tail_sq = 0.0;
    let mut r = sigma.len();
    while r > 0 {
        let next = tail_sq + sigma[r - 1] * sigma[r - 1];
        if next.sqrt() > threshold {
            break;
        }
        tail_sq = next;
        r -= 1;
    }
    r.clamp(r_min, r_max).min(sigma.len()).max(1)
}

fn check_finite(f: &LowRankFactors, what: &'static str) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Compresses `X_hat S_hat W_hat^T` through an SVD of `S_hat`.
pub fn truncate(
    x_hat: &DMatrix<f64>,
    s_hat: &DMatrix<f64>,
    w_hat: &DMatrix<f64>,
    policy: &TruncationPolicy,
) -> Result<(LowRankFactors, TruncationInfo)> {
    policy.validate()?;
    if s_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coefficient matrix before truncation"));
    }
    let svd = thin_svd(s_hat)?;
    let sigma = svd.sigma;
    let threshold = policy.threshold(s_hat.norm());
    let r = select_rank(&sigma, threshold, policy.r_min, policy.r_max);
    let u_r = svd.u.columns(0, r).into_owned();
    let v_r = svd.v.columns(0, r).into_owned();
    let discarded = sigma[r..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let out = LowRankFactors {
        x: x_hat * u_r,
        s: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&sigma[..r])),
        w: w_hat * v_r,
    };
    Ok((out, TruncationInfo { singular_values: sigma, threshold, discarded, rank: r }))
}

/// K- and L-substeps with explicit Euler, run concurrently.
fn kl_substeps<F: FactoredFlow>(f: &LowRankFactors, flow: &F, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let k0 = &f.x * &f.s;
    let l0 = &f.s * f.w.transpose();
    rayon::join(
        || {
            let mut k1 = flow.k_rhs(&k0, &f.w);
            k1 *= dt;
            k1 += &k0;
            k1
        },
        || {
            let mut l1 = flow.l_rhs(&f.x, &l0);
            l1 *= dt;
            l1 += &l0;
            l1
        },
    )
}

/// Fixed-rank step: new bases from K and L, then a Galerkin S-step.
pub fn bug_step<F: FactoredFlow>(f: &LowRankFactors, flow: &F, dt: f64) -> Result<LowRankFactors> {
    let (k1, l1) = kl_substeps(f, flow, dt);
    let x1 = orthonormalize(&k1).q;
    let w1 = orthonormalize(&l1.transpose()).q;
    let s_tilde = (x1.transpose() * &f.x) * &f.s * (f.w.transpose() * &w1);
    let mut s1 = flow.s_rhs(&x1, &x1, &s_tilde, &w1, &w1);
    s1 *= dt;
    s1 += &s_tilde;
    let out = LowRankFactors { x: x1, s: s1, w: w1 };
    check_finite(&out, "fixed-rank step")?;
    Ok(out)
}

/// Rank-adaptive step: bases augmented by the K/L directions (at most doubling),
/// a Galerkin step from the padded old coefficients, then truncation.
pub fn adaptive_bug_step<F: FactoredFlow>(
    f: &LowRankFactors,
    flow: &F,
    dt: f64,
    policy: &TruncationPolicy,
) -> Result<(LowRankFactors, TruncationInfo)> {
    let r = f.rank();
    let (k1, l1) = kl_substeps(f, flow, dt);
    let x_hat = augment_basis(&f.x, &k1, 2 * r);
    let w_hat = augment_basis(&f.w, &l1.transpose(), 2 * r);
    let mut s_hat = flow.s_rhs(&x_hat, &f.x, &f.s, &f.w, &w_hat);
    s_hat *= dt;
    s_hat.view_mut((0, 0), f.s.shape()).zip_apply(&f.s, |a, b| *a += b);
    truncate(&x_hat, &s_hat, &w_hat, policy)
}

/// Implicit self-scattering substep acting on `W` and `S` only:
/// `L_tilde = S W^T D^{-1}` with `D = diag(1 + dt Sigma_t - dt Sigma_kk)`,
/// refactored by QR so `X` is unchanged.
pub fn psi_l_step_scatter(f: &LowRankFactors, sigma_t: f64, sigma_diag: &[f64], dt: f64) -> Result<LowRankFactors> {
    if sigma_diag.len() != f.m() {
        return Err(Error::DimensionMismatch {
            what: "scattering diagonal",
            expected: f.m(),
            actual: sigma_diag.len(),
        });
    }
    let mut inv = Vec::with_capacity(sigma_diag.len());
    for (index, &s) in sigma_diag.iter().enumerate() {
        let d = 1.0 + dt * sigma_t - dt * s;
        if !(d > 0.0) {
            return Err(Error::ScatterDenominator { index, value: d });
        }
        inv.push(1.0 / d);
    }
    let mut lt = &f.w * f.s.transpose();
    for (mut row, d) in lt.row_iter_mut().zip(&inv) {
        row *= *d;
    }
    let qr = orthonormalize(&lt);
    let out = LowRankFactors {
        x: f.x.clone(),
        s: qr.r.transpose(),
        w: qr.q,
    };
    check_finite(&out, "scattering L-step")?;
    Ok(out)
}

/// `F(u) = P u Q` with dense `P`, `Q`; used as a reference flow.
#[derive(Debug, Clone)]
pub struct DenseLinearFlow {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl FactoredFlow for DenseLinearFlow {
    fn k_rhs(&self, k: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
        &self.p * k * (w.transpose() * &self.q * w)
    }

    fn l_rhs(&self, x: &DMatrix<f64>, l: &DMatrix<f64>) -> DMatrix<f64> {
        (x.transpose() * &self.p * x) * l * &self.q
    }

    fn s_rhs(
        &self,
        x_out: &DMatrix<f64>,
        x_in: &DMatrix<f64>,
        s: &DMatrix<f64>,
        w_in: &DMatrix<f64>,
        w_out: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        (x_out.transpose() * &self.p * x_in) * s * (w_in.transpose() * &self.q * w_out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn flow(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DenseLinearFlow {
        DenseLinearFlow { p: random(rng, n, n), q: random(rng, m, m) }
    }

    #[test]
    fn rank_selection() {
        let s = [3.0, 2.0, 1.0, 0.1, 0.01];
        assert_eq!(select_rank(&s, 0.0, 1, 10), 5);
        assert_eq!(select_rank(&s, 0.2, 1, 10), 3);
        assert_eq!(select_rank(&s, 0.2, 4, 10), 4);
        assert_eq!(select_rank(&s, 100.0, 1, 10), 1);
        assert_eq!(select_rank(&s, 0.0, 1, 2), 2);
        assert_eq!(select_rank(&[0.0, 0.0], 0.0, 1, 5), 1);
    }

    #[test]
    fn truncation_error_matches_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random(&mut rng, 6, 6);
        let x = orthonormalize(&random(&mut rng, 20, 6)).q;
        let w = orthonormalize(&random(&mut rng, 9, 6)).q;
        let policy = TruncationPolicy::relative(0.3, 1, 6);
        let (out, info) = truncate(&x, &s, &w, &policy).unwrap();
        let err = (out.to_dense() - &x * &s * w.transpose()).norm();
        assert!((err - info.discarded).abs() < 1e-12);
        assert!(info.discarded <= info.threshold);
        assert!(out.orthonormality_error() < 1e-13);
    }

    #[test]
    fn full_rank_bug_step_reproduces_euler_when_square() {
        // with r = n_x = m both bases span the whole space
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fl = flow(&mut rng, 6, 6);
        let u0 = random(&mut rng, 6, 6);
        let f = LowRankFactors::from_dense(&u0, 6).unwrap();
        let dt = 0.01;
        let next = bug_step(&f, &fl, dt).unwrap();
        let euler = &u0 + (&fl.p * &u0 * &fl.q) * dt;
        assert!((next.to_dense() - euler).norm() < 1e-12);
    }

    #[test]
    fn adaptive_step_without_truncation_is_exact_at_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, m) = (30, 5);
        let fl = flow(&mut rng, n, m);
        let u0 = random(&mut rng, n, 2) * random(&mut rng, 2, m);
        let mut f = LowRankFactors::from_dense(&u0, m).unwrap();
        let mut u = u0.clone();
        let dt = 0.01;
        let policy = TruncationPolicy::absolute(0.0, m, m);
        for _ in 0..20 {
            f = adaptive_bug_step(&f, &fl, dt, &policy).unwrap().0;
            u = &u + (&fl.p * &u * &fl.q) * dt;
        }
        assert!((f.to_dense() - &u).norm() < 1e-12 * u.norm());
    }

    #[test]
    fn adaptive_rank_at_most_doubles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fl = flow(&mut rng, 40, 12);
        let mut f = LowRankFactors::from_dense(&random(&mut rng, 40, 12), 2).unwrap();
        let policy = TruncationPolicy::absolute(0.0, 1, 12);
        let mut prev = f.rank();
        for _ in 0..4 {
            f = adaptive_bug_step(&f, &fl, 0.05, &policy).unwrap().0;
            assert!(f.rank() <= 2 * prev);
            prev = f.rank();
        }
        assert!(prev > 2 && prev <= 12);
    }

    #[test]
    fn psi_l_step_matches_dense_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u0 = random(&mut rng, 15, 3) * random(&mut rng, 3, 9);
        let f = LowRankFactors::from_dense(&u0, 3).unwrap();
        let diag: Vec<f64> = (0..9).map(|k| 0.8f64.powi(k)).collect();
        let (st, dt) = (1.0, 0.2);
        let next = psi_l_step_scatter(&f, st, &diag, dt).unwrap();
        assert_eq!(next.x, f.x);
        let expect = DMatrix::from_fn(15, 9, |i, k| u0[(i, k)] / (1.0 + dt * st - dt * diag[k]));
        assert!((next.to_dense() - expect).norm() < 1e-12);
        assert!(next.orthonormality_error() < 1e-13);
        assert!(next.norm() <= f.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn psi_l_step_rejects_nonpositive_denominator() {
        let f = LowRankFactors::zeros(4, 2, 1);
        let err = psi_l_step_scatter(&f, 0.0, &[20.0, 0.0], 0.1).unwrap_err();
        assert!(matches!(err, Error::ScatterDenominator { index: 0, .. }));
    }
}
