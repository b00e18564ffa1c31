use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] kleinsplit::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Data { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Data { .. } => "data",
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("error".into(), self.kind().into());
        obj.insert("exit_code".into(), self.exit_code().into());
        obj.insert("message".into(), self.to_string().into());
        if let CliError::Numeric(err) = self {
            let detail: Option<(&str, serde_json::Value)> = match err {
                kleinsplit::Error::NotHyperbolic { margin } => Some(("margin", finite_or_text(*margin))),
                kleinsplit::Error::NonIntegral { max_deviation } => {
                    Some(("max_deviation", finite_or_text(*max_deviation)))
                }
                kleinsplit::Error::Inconsistent { residual } => Some(("residual", finite_or_text(*residual))),
                kleinsplit::Error::NotInSl { det } | kleinsplit::Error::NotUnimodular { det } => {
                    Some(("det", det.to_string().into()))
                }
                _ => None,
            };
            if let Some((key, value)) = detail {
                obj.insert(key.into(), value);
            }
        }
        serde_json::Value::Object(obj).to_string()
    }
}

fn finite_or_text(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map_or_else(|| v.to_string().into(), serde_json::Value::Number)
}
