use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid or inconsistent configuration. `key` names the offending field.
    #[error("configuration error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// A model was queried outside its domain of validity.
    #[error("model domain error: {0}")]
    Domain(String),

    /// Malformed input file. `location` is a line number or byte offset.
    #[error("parse error in {path} at {location}: {msg}")]
    Parse {
        path: PathBuf,
        location: String,
        msg: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<SimError>,
    },

    #[error("runtime error: {0}")]
    Runtime(String),
}

impl SimError {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        SimError::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        SimError::Domain(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn with_context(self, context: impl Into<String>) -> Self {
        SimError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True if the root cause is a configuration problem.
    pub fn is_config(&self) -> bool {
        match self {
            SimError::Config { .. } => true,
            SimError::Context { source, .. } => source.is_config(),
            _ => false,
        }
    }

    pub fn root(&self) -> &SimError {
        match self {
            SimError::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
