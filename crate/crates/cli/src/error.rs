use thiserror::Error;

use dilate_core::DilateError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    /// A stage ran but its result misses a numerical tolerance.
    #[error("stage '{stage}': {message}")]
    Tolerance {
        stage: &'static str,
        message: String,
    },

    #[error("stage '{stage}': {source}")]
    Numerical {
        stage: &'static str,
        #[source]
        source: DilateError,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Tolerance { .. } | CliError::Numerical { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// Attribute a core error to `stage`; malformed inputs become
    /// validation errors, everything else is a numerical failure.
    pub fn from_core(stage: &'static str, e: DilateError) -> Self {
        match e {
            DilateError::InvalidInput(m) | DilateError::Dimension(m) => {
                CliError::Validation(format!("stage '{stage}': {m}"))
            }
            other => CliError::Numerical {
                stage,
                source: other,
            },
        }
    }
}
