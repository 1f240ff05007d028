use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("branch cells {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("branch cells do not tile the unit cube (total volume {volume})")]
    Coverage { volume: f64 },
    #[error("branch {0} is not a bijection onto the unit cube")]
    NotBijective(usize),
    #[error("boundary point {point:?} has no interior preimage")]
    Boundary { point: Vec<f64> },
    #[error("cylinder {word:?} is not an axis-aligned cube (extents {extents:?})")]
    NonCube { word: Vec<usize>, extents: Vec<f64> },
    #[error("branch index {index} out of range (map has {branches} branches)")]
    Index { index: usize, branches: usize },
    #[error("partition recursion exceeded safety depth {0}")]
    Depth(usize),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("kernel support is below grid resolution: {0}")]
    Resolution(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("grid size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("grid of size {m} is not aligned with {what}")]
    Alignment { m: usize, what: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("eigen-inequality certificate failed at eps={eps}: cell {cell} ratio {ratio} < bound {bound}")]
    CertificateFailure { eps: f64, cell: usize, ratio: f64, bound: f64 },
    #[error("envelope persistence failed at step {step}: {detail}")]
    PersistenceFailure { step: usize, detail: String },
    #[error("no convergence within {horizon} steps (last residual {residual})")]
    NonConvergence { horizon: usize, residual: f64 },
    #[error("power iteration stalled at n={n}: bracket [{lo}, {hi}]")]
    PowerIterationStall { n: usize, lo: f64, hi: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("spectral cutoff overflow: {0} modes left the lattice")]
    CutoffOverflow(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
