use std::path::PathBuf;

use ocmt::Category;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// `row` counts file lines, header included.
    #[error("row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("no complete rows remain after dropping {dropped} with missing cells")]
    NoCompleteRows { dropped: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] ocmt::Error),

    #[error("cannot encode result document: {0}")]
    Encode(#[from] serde_json::Error),
}

impl CliError {
    pub fn category(&self) -> Category {
        match self {
            CliError::Io { .. } | CliError::Encode(_) => Category::Io,
            CliError::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => Category::Io,
            CliError::Parse { .. } | CliError::Csv(_) | CliError::NoCompleteRows { .. } => {
                Category::Parse
            }
            CliError::Config(_) => Category::Config,
            CliError::Core(e) => e.category(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        exit_code(self.category())
    }
}

/// Process exit status for each error category; 0 is success.
pub fn exit_code(category: Category) -> u8 {
    match category {
        Category::Config => 2,
        Category::Io => 3,
        Category::Parse => 4,
        Category::Numeric => 5,
        Category::Overparameterized => 6,
    }
}
