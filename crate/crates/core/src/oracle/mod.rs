//! Dense reference solver for the same split scheme, and canned benchmark setups.
//!
//! Every moment component is stored as a full `n_x x m` matrix; the step
//! applies explicit Euler streaming, implicit scattering per level and the
//! columnwise self-scattering division of the collided component, in the
//! same order as [`crate::solver::step`].

mod setups;

pub use setups::{
    beam_problem, layered_phantom, line_source_density, linesource_is_slow, linesource_setup, lung_setup, LineSourceSetup, LungParams,
    LINE_SOURCE_SIGMA,
};

use nalgebra::DMatrix;

use crate::angular::Quadrature;
use crate::dlra::LowRankFactors;
use crate::error::{Error, Result};
use crate::solver::{
    advance_uncollided, march, scalar_flux_of, MarchState, MultilevelState, Problem, RunFailure, RunReport,
    ScatterSource, SolverConfig, StepInfo, StreamingFlow,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub psi_u: DMatrix<f64>,
    pub levels: Vec<DMatrix<f64>>,
    pub collided: DMatrix<f64>,
    pub t: f64,
    pub step_index: usize,
}

impl FullState {
    pub fn new(psi_u: DMatrix<f64>, m: usize, levels: usize) -> Self {
        let n_x = psi_u.nrows();
        Self {
            psi_u,
            levels: vec![DMatrix::zeros(n_x, m); levels],
            collided: DMatrix::zeros(n_x, m),
            t: 0.0,
            step_index: 0,
        }
    }

    /// Dense copy of a factored state.
    pub fn from_multilevel(state: &MultilevelState) -> Self {
        Self {
            psi_u: state.psi_u.clone(),
            levels: state.levels.iter().map(|f| f.to_dense()).collect(),
            collided: state.collided.to_dense(),
            t: state.t,
            step_index: state.step_index,
        }
    }

    /// Variant without the collision split: the uncollided density is moved
    /// into the collided moments (`psi T_M`) and the levels are dropped, so
    /// the march is a plain moment solve. Only meaningful without inflow.
    pub fn unsplit(&self, quadrature: &Quadrature) -> Self {
        let mut collided = &self.psi_u * quadrature.t_m() + &self.collided;
        for u in &self.levels {
            collided += u;
        }
        Self {
            psi_u: DMatrix::zeros(self.psi_u.nrows(), self.psi_u.ncols()),
            levels: Vec::new(),
            collided,
            t: self.t,
            step_index: self.step_index,
        }
    }

    pub fn norms(&self) -> Vec<f64> {
        let mut out = vec![self.psi_u.norm()];
        out.extend(self.levels.iter().map(|u| u.norm()));
        out.push(self.collided.norm());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.psi_u.iter().chain(self.collided.iter()).all(|v| v.is_finite())
            && self.levels.iter().all(|u| u.iter().all(|v| v.is_finite()))
    }

    pub fn scalar_flux(&self, quadrature: &Quadrature) -> Vec<f64> {
        let cols: Vec<Vec<f64>> = self
            .levels
            .iter()
            .chain(std::iter::once(&self.collided))
            .map(|u| u.column(0).iter().copied().collect())
            .collect();
        scalar_flux_of(&self.psi_u, &cols, quadrature)
    }

    /// Moment components (levels, collided).
    pub fn moments(&self) -> Vec<&DMatrix<f64>> {
        self.levels.iter().chain(std::iter::once(&self.collided)).collect()
    }
}

/// One dense step of length `dt`.
pub fn full_step(state: &FullState, problem: &Problem, config: &SolverConfig, dt: f64) -> Result<FullState> {
    let t1 = state.t + dt;
    let sigma1 = problem.scatter_at(t1)?;
    let sigma_t = sigma1.sigma_t();
    let diag = sigma1.diag();
    let damping = 1.0 / (1.0 + dt * sigma_t);
    let t_m = problem.quadrature.t_m();
    let flow = StreamingFlow::new(&problem.stencils, &problem.basis);
    let stream = |u: &DMatrix<f64>| {
        if config.streaming {
            u + flow.apply_dense(u) * dt
        } else {
            u.clone()
        }
    };

    let psi1 = advance_uncollided(&state.psi_u, problem, config, state.t, sigma_t, dt)?;
    let mut levels: Vec<DMatrix<f64>> = Vec::with_capacity(state.levels.len());
    for (l, u0) in state.levels.iter().enumerate() {
        let src = match l {
            0 => ScatterSource::Nodal { psi: &psi1, t_m }.dense(&diag),
            _ => levels[l - 1].clone() * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&diag)),
        };
        levels.push((stream(u0) + src * dt) * damping);
    }
    let src = match levels.last() {
        None => ScatterSource::Nodal { psi: &psi1, t_m }.dense(&diag),
        Some(u) => u * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&diag)),
    };
    let mut collided = stream(&state.collided) + src * dt;
    for (k, mut col) in collided.column_iter_mut().enumerate() {
        let d = 1.0 + dt * sigma_t - dt * diag[k];
        if !(d > 0.0) {
            return Err(Error::ScatterDenominator { index: k, value: d });
        }
        col /= d;
    }
    let next = FullState {
        psi_u: psi1,
        levels,
        collided,
        t: t1,
        step_index: state.step_index + 1,
    };
    if !next.is_finite() {
        return Err(Error::NonFinite("oracle state"));
    }
    Ok(next)
}

impl MarchState for FullState {
    const TAG: &'static str = "oracle";

    fn time(&self) -> f64 {
        self.t
    }

    fn step_index(&self) -> usize {
        self.step_index
    }

    fn norms(&self) -> Vec<f64> {
        FullState::norms(self)
    }

    fn ranks(&self) -> Vec<usize> {
        self.moments().iter().map(|u| u.ncols()).collect()
    }

    fn level_count(&self) -> usize {
        self.levels.len()
    }

    fn scalar_flux(&self, quadrature: &Quadrature) -> Vec<f64> {
        FullState::scalar_flux(self, quadrature)
    }

    fn check(&self, problem: &Problem) -> Result<()> {
        let ok = self.moments().iter().all(|u| u.shape() == (problem.n_x(), problem.m()))
            && self.psi_u.shape() == (problem.n_x(), problem.quadrature.n_q());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("initial oracle state does not match the problem".into()))
        }
    }

    fn advance(&self, problem: &Problem, config: &SolverConfig, dt: f64) -> Result<(Self, StepInfo)> {
        let next = full_step(self, problem, config, dt)?;
        let inter_ranks = next.moments().iter().map(|u| u.ncols()).collect();
        Ok((next, StepInfo { inter_ranks }))
    }

    fn factors(&self) -> Result<Vec<LowRankFactors>> {
        self.moments().into_iter().map(|u| LowRankFactors::from_dense(u, u.ncols())).collect()
    }
}

/// Dense march with the same loop, dose rule and diagnostics as the solver.
pub fn run_oracle(
    problem: &Problem,
    config: &SolverConfig,
    initial: FullState,
) -> std::result::Result<RunReport, Box<RunFailure<FullState>>> {
    march(problem, config, initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlra::TruncationPolicy;
    use crate::solver::{initial_state, RankMode};

    fn small_line_source() -> LineSourceSetup {
        linesource_setup(12, 2, 4).unwrap()
    }

    #[test]
    fn full_rank_adaptive_dlra_matches_oracle() {
        let s = small_line_source();
        let m = s.problem.m();
        let mode = RankMode::Adaptive {
            policy: TruncationPolicy::absolute(0.0, m, m),
            r_init: m,
        };
        let mut config = SolverConfig::new(2, mode);
        config.max_steps = Some(8);
        let dlra = crate::solver::run(&s.problem, &config, initial_state(&s.problem, &config, s.psi0.clone())).unwrap();
        let full = run_oracle(&s.problem, &config, FullState::new(s.psi0.clone(), m, 2)).unwrap();
        let diff: f64 = dlra.scalar_flux.iter().zip(&full.scalar_flux).map(|(a, b)| (a - b).powi(2)).sum();
        let norm: f64 = full.scalar_flux.iter().map(|b| b * b).sum();
        assert!(diff.sqrt() <= 1e-10 * norm.sqrt(), "{}", diff.sqrt() / norm.sqrt());
        assert_eq!(full.tag, "oracle");
    }

    #[test]
    fn collisions_alone_match_the_unsplit_march() {
        let s = small_line_source();
        let m = s.problem.m();
        let mut config = SolverConfig::new(3, RankMode::Fixed { rank: m });
        config.streaming = false;
        config.max_steps = Some(5);
        let split = FullState::new(s.psi0.clone(), m, 3);
        let mut unsplit_config = config.clone();
        unsplit_config.levels = 0;
        let unsplit = split.unsplit(&s.problem.quadrature);
        let a = run_oracle(&s.problem, &config, split).unwrap();
        let b = run_oracle(&s.problem, &unsplit_config, unsplit).unwrap();
        for (x, y) in a.scalar_flux.iter().zip(&b.scalar_flux) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{x} {y}");
        }
        for (x, y) in a.dose.values().iter().zip(b.dose.values()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn oracle_total_norm_never_grows() {
        let s = linesource_setup(16, 3, 8).unwrap();
        let mut config = SolverConfig::new(2, RankMode::Fixed { rank: s.problem.m() });
        config.enforce_stability = true;
        let report = run_oracle(&s.problem, &config, FullState::new(s.psi0.clone(), s.problem.m(), 2)).unwrap();
        assert!((report.t_final - 1.0).abs() < 1e-12);
        assert_eq!(report.stability_violations, 0);
    }

    #[test]
    fn multilevel_round_trip() {
        let s = small_line_source();
        let state = initial_state(&s.problem, &SolverConfig::new(1, RankMode::Fixed { rank: 3 }), s.psi0.clone());
        let full = FullState::from_multilevel(&state);
        assert_eq!(full.norms(), state.norms());
        assert_eq!(full.scalar_flux(&s.problem.quadrature), state.scalar_flux(&s.problem.quadrature));
    }
}
