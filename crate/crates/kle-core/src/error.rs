//! Error type shared by every module in the crate.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building spaces, ensembles, and
/// decompositions, or while parsing the supported file formats.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Requested space has dimension zero.
    InvalidDimension,
    /// Gram matrix is not symmetric positive definite (asymmetry beyond
    /// tolerance, a non-positive diagonal weight, or Cholesky failure).
    NonSPDGram(String),
    /// Block layout does not tile the space: `q * base_dim != dim`.
    BlockMismatch { q: usize, base_dim: usize, dim: usize },
    /// Operands live in spaces of different dimensions.
    DimMismatch { expected: usize, got: usize },
    /// Basis passed to a projection is numerically dependent in the G-inner
    /// product.
    DegenerateBasis,
    /// Ensemble has no samples.
    EmptyEnsemble,
    /// Ensemble weights are invalid (wrong count, non-positive, or not
    /// summing to 1).
    InvalidWeights(String),
    /// Sample matrix contains NaN or infinity.
    NonFiniteInput,
    /// Truncation level `m` exceeds the decomposition rank.
    MOutOfRange { m: usize, rank: usize },
    /// Per-component truncation level exceeds the component dimension.
    R0OutOfRange { r0: usize, base_dim: usize },
    /// Operation requires a blocked space but the space declares no blocks.
    NoBlocks,
    /// Component-wise truncation requires a block-diagonal Gram matrix.
    CrossBlockGram,
    /// Synthetic spectrum longer than the sample count or space dimension
    /// allows.
    SpectrumTooLong { len: usize, max: usize },
    /// Mortality grid is missing a (year, age, region) cell.
    MissingCell { year: i64, age: u32, region: String },
    /// Mortality grid contains a (year, age, region) cell twice.
    DuplicateCell { year: i64, age: u32, region: String },
    /// A CSV row failed to parse; carries the 1-based line number.
    MalformedRow { line: u64, message: String },
    /// Mortality value is negative before the ingest transform.
    NegativeValue { line: u64, value: f64 },
    /// Image file does not start with a supported magic number (P2/P3).
    BadMagic(String),
    /// Image dimensions or channel count do not match the request.
    DimensionMismatch(String),
    /// Image declares a zero maxval, so intensities cannot be rescaled.
    MaxvalZero,
    /// Structured input (JSON space, image header, parameter string)
    /// failed to parse or validate.
    BadFormat(String),
    /// Underlying I/O failure.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimension => write!(f, "space dimension must be at least 1"),
            Error::NonSPDGram(msg) => write!(f, "Gram matrix is not SPD: {msg}"),
            Error::BlockMismatch { q, base_dim, dim } => {
                write!(f, "block layout {q} x {base_dim} does not tile dimension {dim}")
            }
            Error::DimMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::DegenerateBasis => {
                write!(f, "basis is numerically dependent in the G-inner product")
            }
            Error::EmptyEnsemble => write!(f, "ensemble must contain at least one sample"),
            Error::InvalidWeights(msg) => write!(f, "invalid ensemble weights: {msg}"),
            Error::NonFiniteInput => write!(f, "sample matrix contains NaN or infinite entries"),
            Error::MOutOfRange { m, rank } => {
                write!(f, "truncation level {m} out of range for rank {rank}")
            }
            Error::R0OutOfRange { r0, base_dim } => {
                write!(f, "per-component level {r0} exceeds component dimension {base_dim}")
            }
            Error::NoBlocks => write!(f, "operation requires a space with a block layout"),
            Error::CrossBlockGram => {
                write!(f, "Gram matrix couples different blocks; component-wise truncation refused")
            }
            Error::SpectrumTooLong { len, max } => {
                write!(f, "spectrum of length {len} needs more than the available {max} dimensions")
            }
            Error::MissingCell { year, age, region } => {
                write!(f, "missing cell (year {year}, age {age}, region {region})")
            }
            Error::DuplicateCell { year, age, region } => {
                write!(f, "duplicate cell (year {year}, age {age}, region {region})")
            }
            Error::MalformedRow { line, message } => {
                write!(f, "malformed row at line {line}: {message}")
            }
            Error::NegativeValue { line, value } => {
                write!(f, "negative value {value} at line {line}")
            }
            Error::BadMagic(found) => {
                write!(f, "unsupported image magic {found:?}; expected P2 or P3")
            }
            Error::DimensionMismatch(msg) => write!(f, "image dimension mismatch: {msg}"),
            Error::MaxvalZero => write!(f, "image maxval is zero"),
            Error::BadFormat(msg) => write!(f, "bad serialized format: {msg}"),
            Error::Io(msg) => write!(f, "I/O error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
