//! Gaussian inflow beam used as boundary condition of the uncollided sweep.

use crate::error::{Error, Result};

/// Product of Gaussians in energy, position and the direction cosine
/// `Omega_1 = Omega . axis` along the beam axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamModel {
    pub amplitude: f64,
    pub x_mean: f64,
    pub y_mean: f64,
    pub omega_mean: f64,
    pub inv_var_x: f64,
    pub inv_var_y: f64,
    pub inv_var_omega: f64,
    pub inv_var_e: f64,
    pub e_max: f64,
    /// Unit direction of travel.
    pub axis: [f64; 3],
}

impl BeamModel {
    /// Electron beam of 21 MeV centred at (7.25, 14.5) cm travelling along `axis`.
    pub fn reference(axis: [f64; 3]) -> Result<Self> {
        Self {
            amplitude: 1e5,
            x_mean: 7.25,
            y_mean: 14.5,
            omega_mean: 1.0,
            inv_var_x: 20.0,
            inv_var_y: 20.0,
            inv_var_omega: 75.0,
            inv_var_e: 100.0,
            e_max: 21.0,
            axis,
        }
        .validated()
    }

    pub fn validated(mut self) -> Result<Self> {
        for (name, v) in [
            ("inverse x variance", self.inv_var_x),
            ("inverse y variance", self.inv_var_y),
            ("inverse direction variance", self.inv_var_omega),
            ("inverse energy variance", self.inv_var_e),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.amplitude >= 0.0) {
            return Err(Error::InvalidArgument("beam amplitude must be nonnegative".into()));
        }
        let n = self.axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(Error::InvalidArgument("beam axis must be nonzero".into()));
        }
        self.axis.iter_mut().for_each(|a| *a /= n);
        Ok(self)
    }

    /// Inflow density `psi_in(E, x, y, Omega)`.
    pub fn eval(&self, e: f64, x: f64, y: f64, omega: [f64; 3]) -> f64 {
        let w1 = omega[0] * self.axis[0] + omega[1] * self.axis[1] + omega[2] * self.axis[2];
        let arg = self.inv_var_omega * (self.omega_mean - w1).powi(2)
            + self.inv_var_e * (self.e_max - e).powi(2)
            + self.inv_var_x * (self.x_mean - x).powi(2)
            + self.inv_var_y * (self.y_mean - y).powi(2);
        self.amplitude * (-arg).exp()
    }
}
