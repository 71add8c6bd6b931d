use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("vertex list is empty")]
    EmptyVertexList,

    #[error("weights are not in the unit simplex: {0}")]
    NotInSimplex(String),

    #[error("invalid scalar {name} = {value} (must be positive and finite)")]
    InvalidScalar { name: &'static str, value: f64 },

    #[error("assignment does not cover variable index {0}")]
    MissingVariable(usize),

    #[error("expressions do not share one variable layout")]
    LayoutMismatch,

    #[error("conic backend failure: {0}")]
    BackendFailure(String),

    #[error("inner problem infeasible at alpha = {alpha}, rho = {rho}")]
    Infeasible { alpha: f64, rho: f64 },

    #[error("matrix {0} is singular or not positive definite")]
    SingularMatrix(&'static str),

    #[error("solver stalled at alpha = {alpha}, rho = {rho} and its iterate failed verification: {message}")]
    Unresolved { alpha: f64, rho: f64, message: String },

    #[error("Z_d has a nonpositive entry")]
    SingularZd,

    #[error("B_i K2 is singular at vertex {0}")]
    SingularBk2(usize),

    #[error("every grid point of the search is infeasible")]
    AllInfeasible,

    #[error("certificate margins are not strict: {0}")]
    NonstrictMargins(String),

    #[error("non-finite state at t = {0}")]
    NonFinite(f64),

    #[error("state grew by more than {factor:e} in one step at t = {t}")]
    StepTooLarge { t: f64, factor: f64 },

    #[error("disturbance does not vanish at t = 0 (|f(0)| = {0:e}); nonzero initial disturbance is not supported")]
    NonzeroInitialDisturbance(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
