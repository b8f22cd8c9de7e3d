//! Deterministic QR by twice-iterated classical Gram-Schmidt.

use nalgebra::DMatrix;

/// Result of [`orthonormalize`]: `M = Q R` with `Q` column-orthonormal.
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Columns of `M` that were (numerically) dependent on earlier ones and
    /// received a completion vector instead.
    pub deficient: Vec<usize>,
}

/// Relative size below which a projected column counts as dependent.
const DEPENDENCE_TOL: f64 = 1e-12;

/// Projects `v` off the first `k` columns of `q` twice, accumulating the coefficients.
fn project_out(q: &DMatrix<f64>, k: usize, v: &mut Vec<f64>, coeff: &mut [f64]) {
    for _ in 0..2 {
        for c in 0..k {
            let col = q.column(c);
            let dot: f64 = col.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            coeff[c] += dot;
            v.iter_mut().zip(col.iter()).for_each(|(x, qc)| *x -= dot * qc);
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Adds a unit vector orthogonal to the first `k` columns of `q`: the first
/// canonical basis vector with a substantial orthogonal component, or else the
/// one with the largest (its squared residual is at least `(n - k) / n`).
fn completion(q: &DMatrix<f64>, k: usize) -> Vec<f64> {
    let n = q.nrows();
    assert!(k < n, "no completion exists for {k} columns in dimension {n}");
    let mut scratch = vec![0.0; k];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..n {
        let mut v = vec![0.0; n];
        v[e] = 1.0;
        project_out(q, k, &mut v, &mut scratch);
        let nv = norm(&v);
        if nv > 0.5 {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
        if best.as_ref().is_none_or(|(b, _)| nv > *b) {
            best = Some((nv, v));
        }
    }
    let (nv, mut v) = best.expect("n > k >= 0");
    // one more pass removes the error of projecting a short residual
    project_out(q, k, &mut v, &mut scratch);
    let nv2 = norm(&v);
    debug_assert!(nv2 > 0.5 * nv);
    v.iter_mut().for_each(|x| *x /= nv2);
    v
}

/// `M = Q R` with nonnegative diagonal of `R`. Dependent columns get a zero
/// diagonal entry and a completion vector in `Q`, so `Q` always has full
/// column rank.
pub fn orthonormalize(m: &DMatrix<f64>) -> Orthonormalized {
    let (n, k) = m.shape();
    assert!(k <= n, "cannot orthonormalize {k} columns in dimension {n}");
    let mut q = DMatrix::zeros(n, k);
    let mut r = DMatrix::zeros(k, k);
    let mut deficient = Vec::new();
    let mut coeff = vec![0.0; k];
    for j in 0..k {
        let mut v: Vec<f64> = m.column(j).iter().copied().collect();
        let original = norm(&v);
        coeff.iter_mut().for_each(|c| *c = 0.0);
        project_out(&q, j, &mut v, &mut coeff);
        for c in 0..j {
            r[(c, j)] = coeff[c];
        }
        let nv = norm(&v);
        if original == 0.0 || nv <= DEPENDENCE_TOL * original {
            deficient.push(j);
            let e = completion(&q, j);
            q.column_mut(j).copy_from_slice(&e);
            // residual left in v is below tolerance; it is dropped
        } else {
            r[(j, j)] = nv;
            v.iter_mut().for_each(|x| *x /= nv);
            q.column_mut(j).copy_from_slice(&v);
        }
    }
    Orthonormalized { q, r, deficient }
}

/// Extends an orthonormal basis `old` by directions spanning the part of
/// `new` outside its range: returns `[old, X_bar]` with at most `max_cols`
/// columns, so `[old, X_bar]^T old = [I; 0]` holds by construction.
pub fn augment_basis(old: &DMatrix<f64>, new: &DMatrix<f64>, max_cols: usize) -> DMatrix<f64> {
    let (n, r) = old.shape();
    assert_eq!(new.nrows(), n);
    let total = (r + new.ncols()).min(max_cols).min(n).max(r);
    let mut out = DMatrix::zeros(n, total);
    out.columns_mut(0, r).copy_from(old);
    let mut filled = r;
    let mut scratch = vec![0.0; total];
    for j in 0..new.ncols() {
        if filled == total {
            break;
        }
        let mut v: Vec<f64> = new.column(j).iter().copied().collect();
        let original = norm(&v);
        project_out(&out, filled, &mut v, &mut scratch);
        let nv = norm(&v);
        if original > 0.0 && nv > DEPENDENCE_TOL * original {
            v.iter_mut().for_each(|x| *x /= nv);
            out.column_mut(filled).copy_from_slice(&v);
            filled += 1;
        }
    }
    // keep the width fixed so the coefficient padding stays [I; 0]
    while filled < total {
        let e = completion(&out, filled);
        out.column_mut(filled).copy_from_slice(&e);
        filled += 1;
    }
    out
}
