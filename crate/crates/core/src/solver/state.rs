use nalgebra::DMatrix;
use std::f64::consts::PI;

use crate::angular::Quadrature;
use crate::dlra::LowRankFactors;

/// Uncollided nodal density, the intermediate collision levels and the
/// collided remainder, all in transformed variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelState {
    /// `n_x x n_q`
    pub psi_u: DMatrix<f64>,
    pub levels: Vec<LowRankFactors>,
    pub collided: LowRankFactors,
    pub t: f64,
    pub step_index: usize,
}

/// Component labels used in diagnostics: `uncollided`, `level1..levelL`, `collided`.
pub fn component_names(levels: usize) -> Vec<String> {
    let mut names = vec!["uncollided".to_string()];
    names.extend((1..=levels).map(|l| format!("level{l}")));
    names.push("collided".into());
    names
}

/// `sum_q w_q psi_q` plus `sqrt(4 pi)` times the zeroth moment of every moment component.
pub fn scalar_flux_of(psi_u: &DMatrix<f64>, moments_0: &[Vec<f64>], quadrature: &Quadrature) -> Vec<f64> {
    let w = nalgebra::DVector::from_column_slice(quadrature.weights());
    let mut phi: Vec<f64> = (psi_u * w).iter().copied().collect();
    let c = (4.0 * PI).sqrt();
    for col in moments_0 {
        phi.iter_mut().zip(col).for_each(|(p, u)| *p += c * u);
    }
    phi
}

impl MultilevelState {
    /// Zero low-rank components of rank `rank` around an initial uncollided density.
    pub fn new(psi_u: DMatrix<f64>, m: usize, levels: usize, rank: usize) -> Self {
        let n_x = psi_u.nrows();
        Self {
            psi_u,
            levels: (0..levels).map(|_| LowRankFactors::zeros(n_x, m, rank)).collect(),
            collided: LowRankFactors::zeros(n_x, m, rank),
            t: 0.0,
            step_index: 0,
        }
    }

    /// Norms in component order (see [`component_names`]).
    pub fn norms(&self) -> Vec<f64> {
        let mut out = vec![self.psi_u.norm()];
        out.extend(self.levels.iter().map(|f| f.norm()));
        out.push(self.collided.norm());
        out
    }

    pub fn total_norm(&self) -> f64 {
        self.norms().iter().sum()
    }

    /// Ranks of the factored components (levels, then collided).
    pub fn ranks(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.levels.iter().map(|f| f.rank()).collect();
        out.push(self.collided.rank());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.psi_u.iter().all(|v| v.is_finite())
            && self.levels.iter().all(|f| f.is_finite())
            && self.collided.is_finite()
    }

    pub fn scalar_flux(&self, quadrature: &Quadrature) -> Vec<f64> {
        let cols: Vec<Vec<f64>> = self
            .levels
            .iter()
            .chain(std::iter::once(&self.collided))
            .map(|f| f.column(0))
            .collect();
        scalar_flux_of(&self.psi_u, &cols, quadrature)
    }

    /// Dense moments of all factored components, for comparisons.
    pub fn dense_moments(&self) -> Vec<DMatrix<f64>> {
        self.levels
            .iter()
            .chain(std::iter::once(&self.collided))
            .map(|f| f.to_dense())
            .collect()
    }
}
