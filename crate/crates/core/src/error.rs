use thiserror::Error;

/// Errors raised by the learning toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Hamiltonian spec: {0}")]
    InvalidSpec(String),

    #[error("invalid subspace selection: {0}")]
    InvalidSelection(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("singular subspace selection: rank {rank} of {required} required")]
    SingularSelection { rank: usize, required: usize },

    #[error("matrix is not block diagonal: |M[{row}][{col}]| = {magnitude:e}")]
    NotBlockDiagonal {
        row: usize,
        col: usize,
        magnitude: f64,
    },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("mode violation: {0}")]
    ModeViolation(String),

    #[error("system size {n} exceeds the limit of {max} qubits")]
    SizeLimit { n: usize, max: usize },

    #[error("expected length {expected}, got {got}")]
    WrongLength { expected: usize, got: usize },

    #[error("phase of Fourier coefficient {index} is undefined (zero magnitude)")]
    UndefinedPhase { index: usize },

    #[error("estimated fidelity {0} is not usable")]
    UnusableFidelity(f64),

    #[error("Newton inversion did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("input outside the inversion branch: {0}")]
    OutOfBranch(String),

    #[error("matrix is not invertible: {0}")]
    NonInvertible(String),

    #[error("undefined quantity: {0}")]
    Undefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;
