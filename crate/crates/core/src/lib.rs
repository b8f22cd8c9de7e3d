//! Multilevel collision-source dynamical low-rank solver for the continuous
//! slowing-down transport equation in two space dimensions.
//!
//! The crate is organised bottom-up: [`grid`] and [`angular`] build the
//! discrete operators, [`physics`] supplies material models and the
//! energy/pseudo-time map, [`dlra`] holds the low-rank integrators,
//! [`solver`] runs the multilevel march and [`oracle`] is the dense reference.

pub mod angular;
pub mod dlra;
pub mod error;
pub mod grid;
pub mod oracle;
pub mod physics;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
