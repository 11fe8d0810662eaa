use thiserror::Error;

/// Errors produced by basis construction, model building, diagonalization,
/// propagation, and the experiment pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("site count {n_sites} outside supported range 1..=24")]
    SiteCount { n_sites: usize },

    #[error("sector 2*Sz = {twice_sz} is not reachable with {n_sites} spin-1/2 sites")]
    InvalidSector { n_sites: usize, twice_sz: i32 },

    #[error("state norm {norm} deviates from 1 beyond tolerance")]
    NotNormalized { norm: f64 },

    #[error("site index {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("block dimension {dim} exceeds dense solver cap {cap}; decompose into Sz sectors first")]
    DimensionCap { dim: usize, cap: usize },

    #[error("operand bases do not match")]
    BasisMismatch,

    #[error("model anomaly: {0}")]
    ModelAnomaly(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("Krylov propagation did not converge: residual {residual:.3e} after {dim} vectors")]
    NoConvergence { residual: f64, dim: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}
