use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value {value} lies outside the unit interval")]
    Domain { value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("design is numerically rank deficient (singular value ratio {ratio:.3e})")]
    Singular { ratio: f64 },

    #[error("column has no variation")]
    Degenerate,

    #[error("residual variance {sigma2:.3e} is numerically zero")]
    ZeroVariance { sigma2: f64 },

    #[error("{width} regressors leave no residual degrees of freedom at n = {n}")]
    Overparameterized { width: usize, n: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),
}

/// Coarse classification used for exit codes and machine-readable reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Config,
    Io,
    Parse,
    Numeric,
    Overparameterized,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Io => "io",
            Category::Parse => "parse",
            Category::Numeric => "numeric",
            Category::Overparameterized => "overparameterized",
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Config(_) | Error::Dimension(_) | Error::Empty(_) | Error::Domain { .. } => {
                Category::Config
            }
            Error::Singular { .. } | Error::Degenerate | Error::ZeroVariance { .. } => {
                Category::Numeric
            }
            Error::Overparameterized { .. } => Category::Overparameterized,
        }
    }
}
