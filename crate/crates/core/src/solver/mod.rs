//! Multilevel collision-source march for the factored components.

mod config;
mod problem;
mod report;
mod run;
mod scatter;
mod state;
mod streaming;

pub use config::{RankMode, SolverConfig};
pub use problem::Problem;
pub use report::{RunFailure, RunReport, StepRecord};
pub use run::{
    advance_uncollided, choose_dt, end_time, initial_state, march, run, step, stream_component,
    MarchState, StepInfo, NORM_TOLERANCE,
};
pub use scatter::{scatter_update, scatter_update_collided, ScatterSource};
pub use state::{component_names, scalar_flux_of, MultilevelState};
pub use streaming::{cfl_dt, max_speed, uncollided_step, StreamingFlow};
