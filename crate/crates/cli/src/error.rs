use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {reason}")]
    ConfigLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] flinfer_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        CliError::Csv {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigLine { .. } => 2,
            CliError::Data(_) | CliError::Io { .. } | CliError::Csv { .. } => 3,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &flinfer_core::Error) -> i32 {
    use flinfer_core::Error as E;
    match e {
        E::NonFinite { .. } => 4,
        E::Client { source, .. } => core_exit_code(source),
        E::InvalidArgument(_) | E::LabelOutOfRange { .. } => 2,
        E::Shape { .. }
        | E::EmptyData
        | E::InsufficientSamples { .. }
        | E::MissingAuxiliary(_)
        | E::Format { .. }
        | E::Decode(_)
        | E::Io { .. } => 3,
    }
}
