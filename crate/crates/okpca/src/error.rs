use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid trajectory {id:?}: {reason}")]
    InvalidTrajectory { id: String, reason: String },

    #[error("empty dataset: at least one trajectory is required")]
    EmptyDataset,

    #[error("invalid kernel width mu = {0}: must be positive and finite")]
    InvalidKernelWidth(f64),

    #[error("Gram matrix is already centered; centering twice is a bug")]
    AlreadyCentered,

    #[error("Gram matrix is not centered")]
    NotCentered,

    #[error("requested {requested} components but numerical rank is {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("simulation diverged at t = {time} (non-finite state)")]
    SimulationDiverged { time: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV in {path}{}: {reason}", line.map(|l| format!(", line {l}")).unwrap_or_default())]
    Csv {
        path: String,
        line: Option<u64>,
        reason: String,
    },

    #[error("model serialization: {0}")]
    ModelFormat(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
