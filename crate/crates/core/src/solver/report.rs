use crate::dlra::LowRankFactors;
use crate::error::Error;
use crate::grid::Grid2D;
use crate::physics::DoseGrid;

/// Diagnostics of one recorded step. Rank vectors list the levels and then
/// the collided component; norm vectors start with the uncollided density.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Pseudo-time after the step.
    pub t: f64,
    pub dt: f64,
    pub ranks: Vec<usize>,
    /// Ranks after the streaming substeps.
    pub inter_ranks: Vec<usize>,
    pub norms: Vec<f64>,
    pub total_before: f64,
    pub total_after: f64,
    /// Seconds since the start of the run.
    pub wall_seconds: f64,
}

/// Result of a completed march.
#[derive(Debug, Clone)]
pub struct RunReport {
    /// `dlra` or `oracle`.
    pub tag: String,
    pub grid: Grid2D,
    pub component_names: Vec<String>,
    pub dose: DoseGrid,
    /// Scalar flux of the final state.
    pub scalar_flux: Vec<f64>,
    pub records: Vec<StepRecord>,
    /// Final factored components by name (the oracle stores SVD factors).
    pub factors: Vec<(String, LowRankFactors)>,
    pub steps: usize,
    pub t_final: f64,
    /// Steps at which the total norm grew beyond the tolerance (never counted with inflow).
    pub stability_violations: usize,
    pub wall_seconds: f64,
}

/// A march that stopped early, with the last state that was still valid.
#[derive(Debug)]
pub struct RunFailure<S> {
    pub error: Error,
    pub step: usize,
    pub t: f64,
    pub last_good: S,
    pub records: Vec<StepRecord>,
}

impl<S> std::fmt::Display for RunFailure<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run stopped after step {} at t = {}: {}", self.step, self.t, self.error)
    }
}

impl<S: std::fmt::Debug> std::error::Error for RunFailure<S> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}
