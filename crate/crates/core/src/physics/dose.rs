//! Dose accumulated over the pseudo-time march.
//!
//! In transformed variables `D(x) = (1/rho) int int S(E(t)) psi~ dOmega dt`,
//! evaluated with the left-endpoint rule: each step adds
//! `S(E(t_0)) dt Phi(t_0) / rho` with `Phi` the scalar flux of all components.

#[derive(Debug, Clone, PartialEq)]
pub struct DoseGrid {
    values: Vec<f64>,
    /// Number of accumulated steps.
    steps: usize,
    /// Pseudo-time covered so far.
    covered: f64,
}

impl DoseGrid {
    pub fn zeros(n_cells: usize) -> Self {
        Self {
            values: vec![0.0; n_cells],
            steps: 0,
            covered: 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn covered_time(&self) -> f64 {
        self.covered
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Adds `stopping * dt * flux / rho` cellwise.
    pub fn accumulate(&mut self, scalar_flux: &[f64], rho: &[f64], stopping: f64, dt: f64) {
        assert_eq!(scalar_flux.len(), self.values.len());
        assert_eq!(rho.len(), self.values.len());
        for ((d, f), r) in self.values.iter_mut().zip(scalar_flux).zip(rho) {
            *d += stopping * dt * f / r;
        }
        self.steps += 1;
        self.covered += dt;
    }
}
