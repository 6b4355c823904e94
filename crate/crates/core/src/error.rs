use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension {0} is not supported (expected 1..={max})", max = crate::lattice::MAX_DIM)]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("tree gauge needs 2 to 4 distinct points, got {0}")]
    UnsupportedGaugeSize(usize),
    #[error("offspring sequence does not describe a finite rooted tree")]
    InvalidTree,
    #[error("point lies outside the step table box")]
    OutOfBox,
    #[error("step table needs {required} entries, limit is {limit}")]
    MemoryBudget { required: u64, limit: u64 },
    #[error("rejection budget exhausted after {attempts} attempts")]
    RejectionBudget { attempts: u64 },
    #[error("insufficient data: {usable} usable rows, at least {required} required")]
    InsufficientData { usable: usize, required: usize },
    #[error("window of radius {radius} does not safely contain the target set")]
    WindowTooSmall { radius: f64 },
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
}
