use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("unsupported basis `{0}`")]
    UnsupportedBasis(String),
    #[error("element `{element}` not available in basis `{basis}`")]
    UnsupportedElement { element: String, basis: String },
    #[error("odd electron count {0}: only closed-shell references are supported")]
    OddElectrons(i64),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("singular overlap matrix (condition number {0:e})")]
    SingularOverlap(f64),
    #[error("{what} did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("amplitude blow-up: max |t| = {0:e}")]
    Divergence(f64),
    #[error("vanishing denominator {0:e}")]
    DegenerateDenominator(f64),
    #[error("gauge mismatch: {0}")]
    GaugeMismatch(String),
    #[error("canonicalization tie between localized orbitals {0} and {1}")]
    CanonicalTie(usize, usize),
    #[error("determinant space too large ({0} determinants)")]
    SpaceTooLarge(usize),
    #[error("NaN encountered: {0}")]
    NotFinite(String),
    #[error("corrupt container: {0}")]
    Corrupt(String),
    #[error("container version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code category: 2 usage, 3 convergence, 4 I/O or corruption.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotConverged { .. } | Error::Divergence(_) | Error::NotFinite(_) => 3,
            Error::Io(_)
            | Error::Corrupt(_)
            | Error::VersionMismatch { .. }
            | Error::Invariant(_) => 4,
            _ => 2,
        }
    }
}
