use thiserror::Error;

/// Every failure the pipeline can report. Gate violations carry enough
/// context to name the inequality or clause that failed.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WpError {
    #[error("eigenvalue gap violated at x = {point:?}: rho^2 + omega^2 = {gap_sq:.3e} <= delta0 = {delta0:.3e}")]
    GapViolation {
        point: Vec<f64>,
        gap_sq: f64,
        delta0: f64,
    },
    #[error("resolution gate failed: {0}")]
    Resolution(String),
    #[error("packet too close to the grid boundary: {0}")]
    Boundary(String),
    #[error("spectral interpolation failed: {0}")]
    Interpolation(String),
    #[error("boundary leak at t = {t}: mass {mass:.3e} within {cells} cells of the edge exceeds {limit:.1e}")]
    BoundaryLeak {
        t: f64,
        mass: f64,
        cells: usize,
        limit: f64,
    },
    #[error("relative mass drift {relative:.3e} at t = {t} exceeds {limit:.1e}")]
    MassDrift { t: f64, relative: f64, limit: f64 },
    #[error("adaptive step size underflow at t = {t} (h = {h:.3e})")]
    StepFailure { t: f64, h: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("energy-gap constant Gamma = {gamma:.3e} is not positive")]
    Gamma { gamma: f64 },
    #[error("invalid field: {0}")]
    Field(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for WpError {
    fn from(e: std::io::Error) -> Self {
        WpError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, WpError>;
