use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Fewer support points inside the smoothing window than the local fit needs.
    #[error("insufficient support at {at}: {found} design points within bandwidth {bandwidth}, need {needed}")]
    InsufficientSupport {
        at: String,
        bandwidth: f64,
        found: usize,
        needed: usize,
    },

    #[error("singular local design at {at} (condition number {condition:.3e})")]
    SingularDesign { at: String, condition: f64 },

    #[error("evaluation grids do not match")]
    GridMismatch,

    #[error("negative variance integral {0:.3e}")]
    NegativeVariance(f64),

    #[error("degenerate variance at t = {t}: {value:.3e} below floor {floor:.3e}")]
    DegenerateVariance { t: f64, value: f64, floor: f64 },

    #[error("lag {lag} too large for {n} curves")]
    LagTooLarge { lag: usize, n: usize },

    #[error("fold construction leaves an empty training set (fold {fold})")]
    DegenerateFold { fold: usize },

    #[error("no candidate bandwidth could be evaluated on every fold")]
    NoViableBandwidth,

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error: {0}")]
    SchemaError(String),

    #[error("ragged grid: curve {curve} in sample {sample} of group {group} disagrees with the sample grid")]
    RaggedGrid {
        group: String,
        sample: String,
        curve: String,
    },

    #[error("empty group {0}")]
    EmptyGroup(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::SchemaError(e.to_string())
    }
}
