use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("hermite truncation {requested} exceeds anti-aliasing limit {max}")]
    Aliasing { requested: usize, max: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("shifted support leaves the grid (lost mass fraction {fraction:.3e})")]
    SupportOverflow { fraction: f64 },
    #[error("insufficient grid margin: {0}")]
    Margin(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("lambda {lambda} outside resolved band |lambda| <= {limit}")]
    OutOfBand { lambda: f64, limit: f64 },
    #[error("truncation instability: value {value:.6e}, change {delta:.3e} between N_h/2 and N_h")]
    Truncation { value: f64, delta: f64 },
    #[error("lambda tail dominance: tail fraction {fraction:.3e}")]
    TailDominance { fraction: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("finite-difference inconsistency: {0}")]
    NonSmooth(String),
    #[error("calibration spread {spread:.3e} exceeds tolerance {tol:.1e}")]
    Spread { spread: f64, tol: f64 },
    #[error("symbol is not elliptic on the sampled region (C = {constant:.3e})")]
    NotElliptic { constant: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
