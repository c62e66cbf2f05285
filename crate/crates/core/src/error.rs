use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rectangle {rect} is not aligned with the {n_per_side}x{n_per_side} grid")]
    Alignment { rect: String, n_per_side: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    Shape { what: &'static str, expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    /// `stage` is "outer" (augmented Lagrangian) or "Newton" (inner solver)
    #[error("no convergence after {iterations} {stage} iterations (|g| = {g_abs:.3e}, stationarity = {stationarity:.3e})")]
    NonConvergence { stage: &'static str, iterations: usize, g_abs: f64, stationarity: f64, history: String },

    #[error("trust region collapsed (radius {radius:.3e}) at nu = {nu}, stationarity {stationarity:.3e}")]
    Stagnation { radius: f64, nu: f64, stationarity: f64 },

    #[error("degenerate problem: nu reached the floor {nu_min:.1e}")]
    Degenerate { nu_min: f64 },

    #[error("self-check failed: {0}")]
    SelfCheck(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors that signal a failed optimization rather than bad input.
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Stagnation { .. } | Error::Degenerate { .. })
    }
}
