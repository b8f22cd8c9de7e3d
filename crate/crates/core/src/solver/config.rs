use crate::dlra::TruncationPolicy;
use crate::error::{Error, Result};

/// How factored components choose their rank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankMode {
    Fixed { rank: usize },
    /// Rank-adaptive steps; components start at rank `r_init`.
    Adaptive { policy: TruncationPolicy, r_init: usize },
}

impl RankMode {
    pub fn initial_rank(&self) -> usize {
        match self {
            Self::Fixed { rank } => *rank,
            Self::Adaptive { r_init, .. } => *r_init,
        }
    }

    pub fn r_max(&self) -> usize {
        match self {
            Self::Fixed { rank } => *rank,
            Self::Adaptive { policy, .. } => policy.r_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Number of intermediate collision levels; 0 is the plain collided/uncollided split.
    pub levels: usize,
    pub mode: RankMode,
    pub cfl_safety: f64,
    /// Defaults to the pseudo-time of the energy cutoff.
    pub t_end: Option<f64>,
    pub max_steps: Option<usize>,
    /// Overrides the CFL step (used by tests).
    pub fixed_dt: Option<f64>,
    /// Switches the streaming substeps off (pure collision tests).
    pub streaming: bool,
    /// Record diagnostics every this many steps (the last step is always recorded).
    pub record_every: usize,
    /// Turns a growth of the total norm into an error instead of a counted event.
    /// Problems with inflow are not checked.
    pub enforce_stability: bool,
}

impl SolverConfig {
    pub fn new(levels: usize, mode: RankMode) -> Self {
        Self {
            levels,
            mode,
            cfl_safety: 1.0,
            t_end: None,
            max_steps: None,
            fixed_dt: None,
            streaming: true,
            record_every: 1,
            enforce_stability: false,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidArgument(format!("cfl_safety {} outside (0, 1]", self.cfl_safety)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be at least 1".into()));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidArgument(format!("fixed time step {dt} is not positive")));
            }
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("end time {t} is negative")));
            }
        }
        match self.mode {
            RankMode::Fixed { rank } => {
                if rank == 0 || rank > m {
                    return Err(Error::InvalidArgument(format!("fixed rank {rank} outside [1, {m}]")));
                }
            }
            RankMode::Adaptive { policy, r_init } => {
                policy.validate()?;
                if r_init < policy.r_min || r_init > policy.r_max || r_init > m {
                    return Err(Error::InvalidArgument(format!(
                        "initial rank {r_init} outside [{}, {}]",
                        policy.r_min,
                        policy.r_max.min(m)
                    )));
                }
            }
        }
        Ok(())
    }
}
