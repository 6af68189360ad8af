use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state matrix is not Hurwitz: eigenvalue with real part {max_real_part} >= 0")]
    NotHurwitz { max_real_part: f64 },

    #[error("integration diverged at t = {time}: non-finite state component")]
    Divergence { time: f64 },

    #[error("step {step} does not divide the sample interval {interval} into whole substeps")]
    IncompatibleStep { step: f64, interval: f64 },

    #[error("requested order {requested} exceeds numerical rank {rank}")]
    RankExceeded { requested: usize, rank: usize },

    #[error("singular linear system in {context}: {hint}")]
    Singular {
        context: &'static str,
        hint: &'static str,
    },

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            actual,
        })
    }
}
