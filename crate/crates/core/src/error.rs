use thiserror::Error;

/// Errors raised by the numerical pipeline.
///
/// Each variant maps to one of the CLI exit codes, see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-Hermitian matrix: {0}")]
    NonHermitian(String),

    #[error("inconsistent coefficients: {0}")]
    Inconsistent(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("near an eigenvalue: {0}")]
    PoleProximity(String),

    #[error("eigenvalue search failed: {0}")]
    Search(String),

    #[error("contour quadrature did not converge: {0}")]
    Contour(String),

    #[error("multiplicity mismatch: {0}")]
    Multiplicity(String),

    #[error("spectral data outside the SD class: {0}")]
    SdViolation(String),

    #[error("grouping failed: {0}")]
    Grouping(String),

    #[error("ill-conditioned main equation: {0}")]
    IllConditioned(String),

    #[error("diagonality violated: {0}")]
    Diagonality(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the `gsturm` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::NonHermitian(_)
            | Error::InvalidDimension(_)
            | Error::InvalidInput(_) => 2,
            Error::SdViolation(_) => 4,
            Error::IllConditioned(_) => 5,
            Error::Diagonality(_) => 6,
            Error::Grouping(_) => 7,
            Error::Io(_) => 1,
            _ => 3,
        }
    }

    /// Short machine-readable tag printed on stderr.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid-dimension",
            Error::InvalidInput(_) => "invalid-input",
            Error::NonHermitian(_) => "non-hermitian",
            Error::Inconsistent(_) => "inconsistent-coefficients",
            Error::Resolution(_) => "resolution",
            Error::PoleProximity(_) => "pole-proximity",
            Error::Search(_) => "eigenvalue-search",
            Error::Contour(_) => "contour",
            Error::Multiplicity(_) => "multiplicity",
            Error::SdViolation(_) => "sd-violation",
            Error::Grouping(_) => "grouping",
            Error::IllConditioned(_) => "ill-conditioned",
            Error::Diagonality(_) => "diagonality",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
