use thiserror::Error;

/// Exit status of the command-line tool.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: kernel_balance::Error,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{failed} oracle check(s) failed")]
    OracleFailed { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use kernel_balance::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Stage { source, .. } => match source {
                E::Dimension { .. }
                | E::InvalidArgument(_)
                | E::IncompatibleStep { .. }
                | E::RankExceeded { .. }
                | E::Unsupported(_)
                | E::NotHurwitz { .. } => EXIT_CONFIG,
                _ => EXIT_NUMERICAL,
            },
            CliError::Io(_) => EXIT_CONFIG,
            CliError::OracleFailed { .. } => EXIT_ORACLE,
        }
    }
}

/// Tags a library error with the pipeline stage it came from.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for kernel_balance::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
