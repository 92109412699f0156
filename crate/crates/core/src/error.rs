use thiserror::Error;

pub type Result<T> = std::result::Result<T, QkdError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QkdError {
    #[error("wire {wire} out of range for a {num_wires}-wire register")]
    WireOutOfRange { wire: usize, num_wires: usize },

    #[error("register would exceed {max} wires")]
    RegisterFull { max: usize },

    #[error("angle {0} outside [0, pi/2]")]
    InvalidAngle(f64),

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("q1 = {q1} outside the domain [0, {max}] of the {curve} curve")]
    OutOfDomain {
        curve: &'static str,
        q1: f64,
        max: f64,
    },

    #[error("no crossing found in [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QkdError {
    fn from(e: std::io::Error) -> Self {
        QkdError::Io(e.to_string())
    }
}
