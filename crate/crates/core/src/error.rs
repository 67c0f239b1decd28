use thiserror::Error;

/// Errors raised by the kernel, grid, energy and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate kernel: decay exponent {q} >= n+1 = {limit}, only constants have finite energy")]
    DegenerateKernel { q: f64, limit: f64 },

    #[error("kernel evaluated at the zero offset")]
    ZeroOffset,

    #[error("bad radial range: eps = {eps} must be below R = {r}")]
    BadRange { eps: f64, r: f64 },

    #[error("kernel is not integrable far from the origin; perimeters of bounded sets are infinite")]
    NonIntegrableTail,

    #[error("kernel is not integrable")]
    NonIntegrableKernel,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("fixed-point capacity overflow: {0}")]
    CapacityOverflow(String),

    #[error("level solutions are not nested at threshold index {0}")]
    NestingViolation(usize),

    #[error("domain is not K-admissible: {0}")]
    NotAdmissible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
