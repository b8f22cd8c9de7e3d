//! The multilevel march: uncollided sweep, then streaming and scattering for
//! each level in order, then the collided component.

use std::time::Instant;

use nalgebra::DMatrix;

use super::config::{RankMode, SolverConfig};
use super::problem::Problem;
use super::report::{RunFailure, RunReport, StepRecord};
use super::scatter::{scatter_update, scatter_update_collided, ScatterSource};
use super::state::{component_names, MultilevelState};
use super::streaming::{cfl_dt, uncollided_step, StreamingFlow};
use crate::dlra::{adaptive_bug_step, bug_step, LowRankFactors};
use crate::error::{Error, Result};
use crate::physics::DoseGrid;

/// Relative slack of the total-norm check.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Pseudo-time at which the march stops.
pub fn end_time(problem: &Problem, config: &SolverConfig) -> f64 {
    config.t_end.unwrap_or_else(|| problem.t_end())
}

/// Step size at pseudo-time `t`, clipped so the march lands on the end time.
pub fn choose_dt(problem: &Problem, config: &SolverConfig, t: f64) -> Result<f64> {
    let dt = match config.fixed_dt {
        Some(dt) => dt,
        None => cfl_dt(
            &problem.grid,
            &problem.basis,
            &problem.quadrature,
            &problem.scatter_at(t)?,
            config.cfl_safety,
        )?,
    };
    Ok(dt.min(end_time(problem, config) - t))
}

/// Streaming substep of one factored component.
pub fn stream_component(
    f: &LowRankFactors,
    problem: &Problem,
    config: &SolverConfig,
    dt: f64,
) -> Result<LowRankFactors> {
    if !config.streaming {
        return Ok(f.clone());
    }
    let flow = StreamingFlow::new(&problem.stencils, &problem.basis);
    match &config.mode {
        RankMode::Fixed { .. } => bug_step(f, &flow, dt),
        RankMode::Adaptive { policy, .. } => Ok(adaptive_bug_step(f, &flow, dt, policy)?.0),
    }
}

/// Uncollided update with inflow evaluated at `t0` and absorption at `t0 + dt`.
pub fn advance_uncollided(
    psi: &DMatrix<f64>,
    problem: &Problem,
    config: &SolverConfig,
    t0: f64,
    sigma_t1: f64,
    dt: f64,
) -> Result<DMatrix<f64>> {
    if !config.streaming {
        return Ok(psi / (1.0 + dt * sigma_t1));
    }
    let inflow = problem.inflow_at(t0)?;
    let inflow: Option<&(dyn Fn(f64, f64, [f64; 3]) -> f64 + Sync)> = match &inflow {
        Some(f) => Some(f),
        None => None,
    };
    uncollided_step(psi, &problem.grid, &problem.stencils, &problem.quadrature, inflow, sigma_t1, dt)
}

/// Ranks right after the streaming substeps (levels, then collided).
pub struct StepInfo {
    pub inter_ranks: Vec<usize>,
}

/// One pseudo-time step of length `dt`. Level `l` scatters from level `l - 1`
/// already advanced to the new time (level 1 from the new uncollided density).
pub fn step(
    state: &MultilevelState,
    problem: &Problem,
    config: &SolverConfig,
    dt: f64,
) -> Result<(MultilevelState, StepInfo)> {
    let t0 = state.t;
    let t1 = t0 + dt;
    let sigma1 = problem.scatter_at(t1)?;
    let sigma_t = sigma1.sigma_t();
    let diag = sigma1.diag();
    let damping = 1.0 / (1.0 + dt * sigma_t);
    let t_m = problem.quadrature.t_m();

    let psi1 = advance_uncollided(&state.psi_u, problem, config, t0, sigma_t, dt)?;
    let mut levels: Vec<LowRankFactors> = Vec::with_capacity(state.levels.len());
    let mut inter_ranks = Vec::with_capacity(state.levels.len() + 1);
    for (l, f0) in state.levels.iter().enumerate() {
        let inter = stream_component(f0, problem, config, dt)?;
        inter_ranks.push(inter.rank());
        let src = match l {
            0 => ScatterSource::Nodal { psi: &psi1, t_m },
            _ => ScatterSource::Factored(&levels[l - 1]),
        };
        let (f1, _) = scatter_update(&inter, &src, &diag, dt, damping, &config.mode)?;
        levels.push(f1);
    }
    let inter = stream_component(&state.collided, problem, config, dt)?;
    inter_ranks.push(inter.rank());
    let src = match levels.last() {
        None => ScatterSource::Nodal { psi: &psi1, t_m },
        Some(f) => ScatterSource::Factored(f),
    };
    let (collided, _) = scatter_update_collided(&inter, Some(&src), sigma_t, &diag, dt, &config.mode)?;
    let next = MultilevelState {
        psi_u: psi1,
        levels,
        collided,
        t: t1,
        step_index: state.step_index + 1,
    };
    if !next.is_finite() {
        return Err(Error::NonFinite("multilevel state"));
    }
    Ok((next, StepInfo { inter_ranks }))
}

/// Initial state whose factored components are zero at the configured initial rank.
pub fn initial_state(problem: &Problem, config: &SolverConfig, psi_u: DMatrix<f64>) -> MultilevelState {
    let rank = config.mode.initial_rank().min(problem.m());
    MultilevelState::new(psi_u, problem.m(), config.levels, rank)
}

/// A state the march loop can advance and report on.
pub trait MarchState: Clone {
    /// Tag written to reports.
    const TAG: &'static str;
    fn time(&self) -> f64;
    fn step_index(&self) -> usize;
    /// Norms in component order (uncollided, levels, collided).
    fn norms(&self) -> Vec<f64>;
    /// Ranks of the moment components (levels, collided).
    fn ranks(&self) -> Vec<usize>;
    fn level_count(&self) -> usize;
    fn scalar_flux(&self, quadrature: &crate::angular::Quadrature) -> Vec<f64>;
    /// Shape check against the problem before marching.
    fn check(&self, problem: &Problem) -> Result<()>;
    fn advance(&self, problem: &Problem, config: &SolverConfig, dt: f64) -> Result<(Self, StepInfo)>;
    /// Factored moment components (levels, collided) of the final state.
    fn factors(&self) -> Result<Vec<LowRankFactors>>;
}

impl MarchState for MultilevelState {
    const TAG: &'static str = "dlra";

    fn time(&self) -> f64 {
        self.t
    }

    fn step_index(&self) -> usize {
        self.step_index
    }

    fn norms(&self) -> Vec<f64> {
        MultilevelState::norms(self)
    }

    fn ranks(&self) -> Vec<usize> {
        MultilevelState::ranks(self)
    }

    fn level_count(&self) -> usize {
        self.levels.len()
    }

    fn scalar_flux(&self, quadrature: &crate::angular::Quadrature) -> Vec<f64> {
        MultilevelState::scalar_flux(self, quadrature)
    }

    fn check(&self, problem: &Problem) -> Result<()> {
        let moments_ok = self
            .levels
            .iter()
            .chain(std::iter::once(&self.collided))
            .all(|f| f.n_x() == problem.n_x() && f.m() == problem.m());
        if !moments_ok || self.psi_u.shape() != (problem.n_x(), problem.quadrature.n_q()) {
            return Err(Error::InvalidArgument("initial state does not match the problem".into()));
        }
        Ok(())
    }

    fn advance(&self, problem: &Problem, config: &SolverConfig, dt: f64) -> Result<(Self, StepInfo)> {
        step(self, problem, config, dt)
    }

    fn factors(&self) -> Result<Vec<LowRankFactors>> {
        Ok(self.levels.iter().chain(std::iter::once(&self.collided)).cloned().collect())
    }
}

/// Marches the DLRA state from `initial` to the end time.
pub fn run(
    problem: &Problem,
    config: &SolverConfig,
    initial: MultilevelState,
) -> std::result::Result<RunReport, Box<RunFailure<MultilevelState>>> {
    march(problem, config, initial)
}

/// Marches from `initial` to the end time, accumulating dose with the
/// left-endpoint rule. On failure the last valid state is returned.
pub fn march<S: MarchState>(
    problem: &Problem,
    config: &SolverConfig,
    initial: S,
) -> std::result::Result<RunReport, Box<RunFailure<S>>> {
    let fail = |error: Error, state: &S, records: &[StepRecord]| {
        Box::new(RunFailure {
            error,
            step: state.step_index(),
            t: state.time(),
            last_good: state.clone(),
            records: records.to_vec(),
        })
    };
    let mut records = Vec::new();
    let checked = config.validate(problem.m()).and_then(|_| initial.check(problem)).and_then(|_| {
        if initial.level_count() == config.levels {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "initial state has {} levels, configuration asks for {}",
                initial.level_count(),
                config.levels
            )))
        }
    });
    if let Err(e) = checked {
        return Err(fail(e, &initial, &records));
    }
    let start = Instant::now();
    let t_end = end_time(problem, config);
    let eps = 1e-12 * t_end.max(1.0);
    let mut dose = DoseGrid::zeros(problem.n_x());
    let mut violations = 0;
    // inflow adds mass, so norm decay is only checked on source-free problems
    let check_norm = problem.beam.is_none();
    let mut state = initial;
    while state.time() < t_end - eps && config.max_steps.is_none_or(|n| state.step_index() < n) {
        let t0 = state.time();
        let outcome = (|| {
            let dt = choose_dt(problem, config, t0)?;
            let flux0 = state.scalar_flux(&problem.quadrature);
            let stopping0 = problem.stopping_at(t0)?;
            let (next, info) = state.advance(problem, config, dt)?;
            Ok((dt, flux0, stopping0, next, info))
        })();
        let (dt, flux0, stopping0, next, info) = match outcome {
            Ok(v) => v,
            Err(e) => return Err(fail(e, &state, &records)),
        };
        dose.accumulate(&flux0, problem.grid.density(), stopping0, dt);
        let before: f64 = state.norms().iter().sum();
        let norms = next.norms();
        let after: f64 = norms.iter().sum();
        if check_norm && after > before * (1.0 + NORM_TOLERANCE) {
            violations += 1;
            if config.enforce_stability {
                let e = Error::StabilityViolation {
                    step: next.step_index(),
                    before,
                    after,
                };
                return Err(fail(e, &state, &records));
            }
        }
        let last = next.time() >= t_end - eps || config.max_steps == Some(next.step_index());
        if next.step_index() % config.record_every == 0 || last {
            records.push(StepRecord {
                step: next.step_index(),
                t: next.time(),
                dt,
                ranks: next.ranks(),
                inter_ranks: info.inter_ranks,
                norms,
                total_before: before,
                total_after: after,
                wall_seconds: start.elapsed().as_secs_f64(),
            });
        }
        state = next;
    }
    let names = component_names(config.levels);
    let factors = match state.factors() {
        Ok(f) => names[1..].iter().cloned().zip(f).collect(),
        Err(e) => return Err(fail(e, &state, &records)),
    };
    Ok(RunReport {
        tag: S::TAG.into(),
        grid: problem.grid.clone(),
        component_names: names,
        scalar_flux: state.scalar_flux(&problem.quadrature),
        dose,
        records,
        factors,
        steps: state.step_index(),
        t_final: state.time(),
        stability_violations: violations,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
