use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The Born iterate grew past the overflow guard. Usually a sign of
    /// strong coupling or of a wavenumber close to a spectral singularity.
    #[error("Born series diverged at order {order} (growth factor {growth:.3e})")]
    Divergence { order: usize, growth: f64 },

    #[error("Born series did not converge within {orders} orders (last increment {increment:.3e}); coupling may be too strong")]
    NonConvergence { orders: usize, increment: f64 },

    #[error("oracle refused: {0}")]
    OracleTooLarge(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
