//! Low-rank factorisations `u = X S W^T` and the integrators that evolve them.

mod factors;
mod integrators;
mod orth;
mod svd;

pub use factors::LowRankFactors;
pub use integrators::{
    adaptive_bug_step, bug_step, psi_l_step_scatter, select_rank, truncate, DenseLinearFlow,
    FactoredFlow, TruncationInfo, TruncationMode, TruncationPolicy,
};
pub use orth::{augment_basis, orthonormalize, Orthonormalized};
pub use svd::{thin_svd, ThinSvd};
