use kpo_core::KpoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numeric failure at {point}: {source}")]
    Numeric {
        point: String,
        #[source]
        source: KpoError,
    },

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit status: 2 for usage problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Io { .. } => 2,
            ExperimentError::Numeric { .. } => 3,
        }
    }
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

/// Tags core errors with the parameter point that produced them.
pub(crate) trait AtPoint<T> {
    fn at(self, point: impl FnOnce() -> String) -> Result<T>;
}

impl<T> AtPoint<T> for kpo_core::Result<T> {
    fn at(self, point: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| ExperimentError::Numeric {
            point: point(),
            source,
        })
    }
}
