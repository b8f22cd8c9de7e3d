//! Angular discretisation: real spherical harmonics, P_N flux matrices,
//! the diagonal scattering operator and tensor-product S_N quadratures.

mod basis;
mod harmonics;
mod quadrature;
mod scatter;

pub use basis::{build_pn_basis, roe_matrix, symmetric_eigen_sorted, PnBasis};
pub use harmonics::{degree_order, eval_all_sh, eval_real_sh, flat_index, legendre, n_moments};
pub use quadrature::{build_directed_quadrature, build_quadrature, gauss_legendre, Quadrature};
pub use scatter::{build_scatter_diagonal, ScatterDiagonal};
