use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("torus of {n_sites} sites is too small: need at least {required}")]
    TorusTooSmall { n_sites: usize, required: usize },

    #[error("torus of {n_sites} sites is too large for {what} (limit {limit})")]
    TooLarge {
        what: &'static str,
        n_sites: usize,
        limit: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("operation `{op}` is not defined for model {model}")]
    UnsupportedFamily { op: &'static str, model: String },

    #[error("density {0} is outside [0, 1]")]
    DensityOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time step {dt} exceeds the stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("maximum principle violated at cell {cell}: {value}")]
    MaximumPrinciple { cell: usize, value: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
