use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("value outside field F_{upsilon}: {value}")]
    OutOfField { upsilon: u32, value: u32 },
    #[error("{0} is not a prime")]
    NotPrime(u32),
    #[error("field mismatch: F_{0} vs F_{1}")]
    FieldMismatch(u32, u32),
    #[error("neither code is a sub-coset of the other")]
    NotSubcoset,
    #[error("invalid density operator: {0}")]
    InvalidState(String),
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("unknown coordinate `{0}`")]
    UnknownCoordinate(String),
    #[error("invalid POVM: {0}")]
    Povm(String),
    #[error("label mismatch: {0}")]
    Label(String),
    #[error("LP unbounded")]
    Unbounded,
    #[error("LP infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("exhaustive-decoding cap exceeded: {0}")]
    Cap(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
