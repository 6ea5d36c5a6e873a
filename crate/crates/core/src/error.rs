use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a model invariant. `path` names the
    /// offending field, e.g. `policy.th1/th2`.
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid input: {0}")]
    Input(String),

    /// Moment-matched Beta parameters do not exist for the requested moments.
    #[error("infeasible beta parameterization: mean {mean}, variance {variance} (variance must lie in (0, mean*(1-mean)))")]
    InfeasibleBeta { mean: f64, variance: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Input(_) => "input",
            Error::InfeasibleBeta { .. } => "infeasible_beta",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
