use thiserror::Error;

#[derive(Debug, Error)]
pub enum SgError {
    #[error("evaluation at the origin of a Laurent polynomial with poles (k_min = {k_min})")]
    EvalAtPole { k_min: i64 },

    #[error("interpolation system is ill-conditioned (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("not enough samples: {got} points for {need} free coefficients")]
    TooFewSamples { got: usize, need: usize },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("product over the root-of-unity orbit is not a function of the p-th power (stray coefficient {stray:.3e} against scale {scale:.3e})")]
    NotCyclic { stray: f64, scale: f64 },

    #[error("invalid coupling: p' = {pprime} and p = {p} share a factor, q is not a primitive p-th root")]
    CouplingNotPrimitive { pprime: i64, p: i64 },

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("representation dimension p^N = {dim} exceeds the cap {cap} (override with SGSOV_DIM_CAP)")]
    DimCap { dim: usize, cap: usize },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("linear algebra backend failure: {0}")]
    Lapack(String),

    #[error("spectral data inconsistent: {0}")]
    Spectral(String),

    #[error("functional relation violated: {0}")]
    Functional(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("params file: {0}")]
    ParamsFile(String),
}

impl From<ndarray_linalg::error::LinalgError> for SgError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        SgError::Lapack(e.to_string())
    }
}
