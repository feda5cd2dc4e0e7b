use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// One entry per violated condition.
    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Riccati escape: |P| = {value:e} at t = {t} exceeds cap {cap:e}")]
    RiccatiEscape { t: f64, value: f64, cap: f64 },

    #[error("invalid boundary-value system: {0}")]
    InvalidSystem(String),

    #[error(
        "NCE singular: boundary-matching condition number {condition:e} exceeds {threshold:e}; \
         unique solvability is lost at these parameters or the grid is too coarse"
    )]
    NceSingular { condition: f64, threshold: f64 },

    #[error("NCE unstable, refine grid or shrink T ({0})")]
    NceUnstable(String),

    #[error("simulation overflow: |state| = {value:e} at node {node} (path {path}) exceeds cap {cap:e}")]
    SimulationOverflow { path: usize, node: usize, value: f64, cap: f64 },

    #[error("invalid deviation: {0}")]
    InvalidDeviation(String),

    #[error("fit rejected: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid_params",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::RiccatiEscape { .. } => "riccati_escape",
            Error::InvalidSystem(_) => "invalid_system",
            Error::NceSingular { .. } => "nce_singular",
            Error::NceUnstable(_) => "nce_unstable",
            Error::SimulationOverflow { .. } => "simulation_overflow",
            Error::InvalidDeviation(_) => "invalid_deviation",
            Error::Fit(_) => "fit",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
