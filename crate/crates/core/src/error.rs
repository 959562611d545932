use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh topology: {0}")]
    Topology(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("eigensolver did not converge: {0}")]
    Convergence(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dictionary column {0} has zero norm")]
    ZeroNormColumn(usize),
    #[error("requested {requested} atoms but the dictionary has numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },
    #[error("spectrum has fewer than two positive eigenvalues")]
    DegenerateSpectrum,
    #[error("constraint system is singular")]
    SingularSystem,
    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
