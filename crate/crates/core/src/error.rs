use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The input document does not match the expected JSON schema.
    #[error("schema error in {context}: field `{field}`: {message}")]
    Schema {
        context: String,
        field: String,
        message: String,
    },

    /// Structurally valid input that cannot be summarized.
    #[error("validation error: {0}")]
    Validation(String),

    /// The optimizer could not produce a feasible solution.
    #[error("optimization error: {0}")]
    Optimization(String),

    /// A language-model precondition was broken. This points at a bug in
    /// corpus analysis rather than at bad input.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn schema(context: impl Into<String>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            context: context.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}
