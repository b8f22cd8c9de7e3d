use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("Fourier analysis requires a periodic grid")]
    NotPeriodic,

    #[error("grid with {n_cells} cells exceeds the dense Fourier limit of {limit}")]
    GridTooLarge { n_cells: usize, limit: usize },

    #[error("harmonic index out of range: degree {degree}, order {order}, max degree {max_degree}")]
    HarmonicIndex {
        degree: usize,
        order: i64,
        max_degree: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("scattering denominator 1 + dt*sigma_t - dt*sigma_kk = {value:e} is not positive (moment {index})")]
    ScatterDenominator { index: usize, value: f64 },

    #[error("directed quadrature is empty: cone half-angle {half_angle} rad too narrow for order {order}")]
    EmptyQuadrature { half_angle: f64, order: usize },

    #[error("energy {energy} MeV outside [0, {e_max}] MeV")]
    EnergyOutOfRange { energy: f64, e_max: f64 },

    #[error("pseudo-time {time} outside [0, {t_max}]")]
    TimeOutOfRange { time: f64, t_max: f64 },

    #[error("time step underflow: dt = {0:e}")]
    StepUnderflow(f64),

    #[error("step {step}: total norm grew from {before:e} to {after:e}")]
    StabilityViolation { step: usize, before: f64, after: f64 },

    #[error("gray value {value} at pixel {index} outside [0, 1]")]
    GrayOutOfRange { index: usize, value: f64 },

    #[error("parse error in {source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
