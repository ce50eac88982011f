use serde_json::json;

/// Failure of a CLI run, carrying its exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Help or version output requested; not a failure.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] uquant_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("self-test failed: {0}")]
    SelfTest(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => 0,
            CliError::Usage(_) => 2,
            CliError::Compute(_) | CliError::Io { .. } | CliError::SelfTest(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Info(_) => "info",
            CliError::Usage(_) => "usage",
            CliError::Compute(_) => "computation",
            CliError::Io { .. } => "io",
            CliError::SelfTest(_) => "selftest",
        }
    }

    /// Structured form written to standard error.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
    }
}

pub type CliResult<T> = Result<T, CliError>;
