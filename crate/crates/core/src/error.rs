use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("genotype class {class} is not valid for a {sex} sample")]
    MixedSexClass { class: &'static str, sex: &'static str },
    #[error("missing genotype at position {0}")]
    MissingGenotype(usize),
    #[error("stratum `{0}` has no samples")]
    EmptyStratum(&'static str),
    #[error("dominant coding undefined (p1={p1}, p2={p2}, p3={p3})")]
    DominantUndefined { p1: f64, p2: f64, p3: f64 },
    #[error("column has zero variance")]
    ZeroVariance,
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("no convergence after {0} iterations")]
    NotConverged(usize),
    #[error("fitted probabilities reached 0 or 1 (separation)")]
    Separation,
    #[error("dispersion estimate is zero")]
    DispersionZero,
    #[error("eigen-spectrum has no positive eigenvalue")]
    AllZeroSpectrum,
    #[error("eigenvalue {0} is too negative for a positive semidefinite matrix")]
    NegativeEigenvalue(f64),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("p-value of exactly zero; use the log-scale entry point")]
    ZeroPValue,
    #[error("need at least 2 variants per component, found {0}")]
    TooFewVariants(usize),
    #[error("S_new null law is unspecified for {0} components")]
    UnsupportedComponents(usize),
    #[error("p-value {0} lies on the boundary of (0, 1)")]
    PValueAtBoundary(f64),
    #[error("unknown sign pattern `{0}`")]
    UnknownPattern(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("sample `{0}` is male but carries a female-only genotype")]
    SexGenotypeConflict(String),
    #[error("duplicate sample id `{0}`")]
    DuplicateSample(String),
    #[error("variant `{0}` has a non-positive standard error")]
    NonpositiveSe(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("variant `{0}` not found")]
    MissingVariant(String),
    #[error("window {window} skipped: {reason}")]
    WindowTooSmall { window: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
