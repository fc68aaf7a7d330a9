use thiserror::Error;

#[derive(Debug, Error)]
pub enum CnsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in field at flat index {index}")]
    NonFinite { index: usize },

    #[error("shell index {q} out of range [-1, {q_max}]")]
    ShellOutOfRange { q: i32, q_max: i32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),

    #[error("trajectory is missing required data: {0}")]
    Trajectory(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CnsError> = std::result::Result<T, E>;
