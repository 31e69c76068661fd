use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid config at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },
    #[error("{context}: {source}")]
    Module {
        context: String,
        #[source]
        source: adiv_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("internal failure: {0}")]
    Internal(String),
}

/// Attaches context to core errors.
pub trait Context<T> {
    fn context(self, context: impl Into<String>) -> Result<T, RunError>;
}

impl<T> Context<T> for adiv_core::Result<T> {
    fn context(self, context: impl Into<String>) -> Result<T, RunError> {
        self.map_err(|source| RunError::Module { context: context.into(), source })
    }
}
