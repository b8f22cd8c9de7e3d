//! Energy-dependent material functions and the pseudo-time map
//! `t(E) = int_E^{E_max} dE' / S(E')`.

use crate::angular::{gauss_legendre, ScatterDiagonal};
use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Scalar function of energy (MeV).
#[derive(Debug, Clone, PartialEq)]
pub enum EnergyFunction {
    Constant(f64),
    /// `a + b E`
    Linear { a: f64, b: f64 },
    /// Piecewise linear through `(energy, value)` knots, constant beyond the ends.
    Table { energy: Vec<f64>, value: Vec<f64> },
}

impl EnergyFunction {
    pub fn eval(&self, e: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Linear { a, b } => a + b * e,
            Self::Table { energy, value } => {
                if e <= energy[0] {
                    return value[0];
                }
                let last = energy.len() - 1;
                if e >= energy[last] {
                    return value[last];
                }
                let hi = energy.partition_point(|&x| x <= e);
                let lo = hi - 1;
                let s = (e - energy[lo]) / (energy[hi] - energy[lo]);
                value[lo] + s * (value[hi] - value[lo])
            }
        }
    }

    /// Validated table. Energies must be strictly increasing.
    pub fn table(energy: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        if energy.len() < 2 || energy.len() != value.len() {
            return Err(Error::InvalidArgument(
                "energy table needs at least two (energy, value) rows".into(),
            ));
        }
        if energy.iter().chain(&value).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("energy table"));
        }
        if energy.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("energy table is not strictly increasing".into()));
        }
        Ok(Self::Table { energy, value })
    }

    /// Two-column CSV `energy,value`; blank lines and lines starting with `#` are skipped,
    /// as is a leading header row that does not parse as numbers.
    pub fn from_csv(text: &str, source_name: &str) -> Result<Self> {
        let mut energy = Vec::new();
        let mut value = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 2 => {
                    energy.push(v[0]);
                    value.push(v[1]);
                }
                Err(_) if energy.is_empty() => continue,
                _ => {
                    return Err(Error::Parse {
                        source_name: source_name.to_string(),
                        line: n + 1,
                        message: "expected two numeric columns".into(),
                    })
                }
            }
        }
        Self::table(energy, value)
    }

    /// Points where the function has kinks.
    fn knots(&self) -> &[f64] {
        match self {
            Self::Table { energy, .. } => energy,
            _ => &[],
        }
    }
}

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(8))
}

fn gauss8(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (x, w) = gl8();
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(w).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// Adaptive bisection of an 8-point Gauss rule.
fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let left = gauss8(f, a, m);
    let right = gauss8(f, m, b);
    let refined = left + right;
    if depth == 0 || (refined - whole).abs() <= 1e-14 * refined.abs().max(1e-300) {
        return refined;
    }
    integrate(f, a, m, left, depth - 1) + integrate(f, m, b, right, depth - 1)
}

/// Material description on the energy axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionModel {
    /// Stopping power `S(E)` in MeV cm^2 / g.
    pub stopping: EnergyFunction,
    /// Scattering magnitude `c(E)`, equal to the total cross section.
    pub magnitude: EnergyFunction,
    /// Henyey-Greenstein anisotropy `g(E)`.
    pub anisotropy: EnergyFunction,
    pub e_max: f64,
    /// Lowest energy of the march.
    pub e_cut: f64,
}

impl CrossSectionModel {
    pub fn new(
        stopping: EnergyFunction,
        magnitude: EnergyFunction,
        anisotropy: EnergyFunction,
        e_max: f64,
        e_cut: f64,
    ) -> Result<Self> {
        if !(e_max > 0.0 && e_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("E_max = {e_max} must be positive")));
        }
        if !(e_cut >= 0.0 && e_cut < e_max) {
            return Err(Error::InvalidArgument(format!("E_cut = {e_cut} outside [0, E_max)")));
        }
        let model = Self {
            stopping,
            magnitude,
            anisotropy,
            e_max,
            e_cut,
        };
        // piecewise-linear functions attain extremes at ends and knots
        let mut probes = vec![e_cut, e_max];
        for f in [&model.stopping, &model.magnitude, &model.anisotropy] {
            probes.extend(f.knots().iter().filter(|&&k| k > e_cut && k < e_max));
        }
        for &e in &probes {
            let s = model.stopping.eval(e);
            if !(s > 0.0) && !(e == 0.0 && s == 0.0) {
                return Err(Error::InvalidArgument(format!("stopping power {s} at E = {e} is not positive")));
            }
            let c = model.magnitude.eval(e);
            if !(c > 0.0) {
                return Err(Error::InvalidArgument(format!("cross section {c} at E = {e} is not positive")));
            }
            let g = model.anisotropy.eval(e);
            if !(g.abs() < 1.0) {
                return Err(Error::InvalidArgument(format!("anisotropy {g} at E = {e} outside (-1, 1)")));
            }
        }
        Ok(model)
    }

    /// `E_max = t_end = 1`, `S = 1`, isotropic unit scattering.
    pub fn line_source() -> Self {
        Self::new(
            EnergyFunction::Constant(1.0),
            EnergyFunction::Constant(1.0),
            EnergyFunction::Constant(0.0),
            1.0,
            0.0,
        )
        .expect("valid constants")
    }

    /// Pseudo-time of energy `e`; zero at `E_max`, increasing as energy drops.
    pub fn pseudo_time(&self, e: f64) -> Result<f64> {
        if !(0.0..=self.e_max).contains(&e) {
            return Err(Error::EnergyOutOfRange { energy: e, e_max: self.e_max });
        }
        if e == self.e_max {
            return Ok(0.0);
        }
        if !(self.stopping.eval(e) > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "1/S is not integrable down to E = {e}; use a positive energy cutoff"
            )));
        }
        let f = |x: f64| 1.0 / self.stopping.eval(x);
        let mut cuts = vec![e];
        cuts.extend(self.stopping.knots().iter().filter(|&&k| k > e && k < self.e_max));
        cuts.push(self.e_max);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += integrate(&f, w[0], w[1], gauss8(&f, w[0], w[1]), 30);
        }
        Ok(total)
    }

    /// Pseudo-time at the energy cutoff, i.e. the end of the march.
    pub fn t_end(&self) -> f64 {
        self.pseudo_time(self.e_cut).expect("cutoff validated at construction")
    }

    /// Inverse of [`pseudo_time`](Self::pseudo_time) by bisection on `[E_cut, E_max]`.
    pub fn energy_of(&self, t: f64) -> Result<f64> {
        let t_max = self.t_end();
        let slack = 1e-12 * t_max.max(1.0);
        if !(t >= -slack && t <= t_max + slack) {
            return Err(Error::TimeOutOfRange { time: t, t_max });
        }
        let (mut lo, mut hi) = (self.e_cut, self.e_max);
        while hi - lo > 1e-12 * self.e_max {
            let mid = 0.5 * (lo + hi);
            // pseudo-time decreases with energy
            if self.pseudo_time(mid)? > t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn stopping_at(&self, e: f64) -> f64 {
        self.stopping.eval(e)
    }

    /// Diagonal scattering operator at energy `e` for harmonics up to `degree`.
    pub fn scatter_at(&self, e: f64, degree: usize) -> Result<ScatterDiagonal> {
        ScatterDiagonal::henyey_greenstein(self.magnitude.eval(e), self.anisotropy.eval(e), degree)
    }
}

/// Transformed density `S(E) rho psi`.
pub fn transform_density(psi: f64, e: f64, rho: f64, model: &CrossSectionModel) -> f64 {
    model.stopping_at(e) * rho * psi
}

pub fn inverse_transform_density(psi_t: f64, e: f64, rho: f64, model: &CrossSectionModel) -> f64 {
    psi_t / (model.stopping_at(e) * rho)
}
