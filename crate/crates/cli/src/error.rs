use serde::Serialize;
use thiserror::Error;

/// Failure of a CLI invocation, mapped onto an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{field}: {message}")]
    Validation { field: String, message: String },

    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Io(String),
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    status: &'static str,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
    message: String,
    exit_code: i32,
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation { field: field.into(), message: message.into() }
    }

    /// Classifies a core error raised while working on `field`.
    pub fn from_core(field: &str, e: balmet_core::Error) -> Self {
        use balmet_core::Error as E;
        match e {
            E::HalfStep { .. } | E::Monotonicity { .. } | E::NonConvergent(_) | E::BaseLocus { .. } => {
                CliError::Numerical(e.to_string())
            }
            other if field == "numerics" => CliError::Numerical(other.to_string()),
            other => CliError::validation(field, other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// One-line JSON diagnostic for standard error.
    pub fn to_json(&self) -> String {
        let (kind, field) = match self {
            CliError::Validation { field, .. } => ("validation", Some(field.as_str())),
            CliError::Numerical(_) => ("numerical", None),
            CliError::Io(_) => ("io", None),
        };
        let message = match self {
            CliError::Validation { message, .. } => message.clone(),
            other => other.to_string(),
        };
        let d = Diagnostic { status: "error", kind, field, message, exit_code: self.exit_code() };
        serde_json::to_string(&d).expect("diagnostic serializes")
    }
}
