//! Failures reported as one JSON object on stderr.

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration; raised before any computation.
    Config {
        message: String,
        line: Option<usize>,
        column: Option<usize>,
        field: Option<String>,
    },
    Io(String),
    /// Errors from the solver or simulator.
    Model(fiscal_default::Error),
    /// `validate` found broken invariants.
    Invalid(Value),
}

impl CliError {
    pub fn from_model(e: fiscal_default::Error) -> Self {
        match e {
            fiscal_default::Error::InvalidParameter { name, reason } => CliError::Config {
                message: reason,
                line: None,
                column: None,
                field: Some(name.to_string()),
            },
            e => CliError::Model(e),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Io(_) | CliError::Model(_) => 1,
            CliError::Invalid(_) => 3,
        }
    }

    pub fn to_json(&self) -> Value {
        #[derive(Serialize)]
        struct Report<'a> {
            kind: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            line: Option<usize>,
            #[serde(skip_serializing_if = "Option::is_none")]
            column: Option<usize>,
            #[serde(skip_serializing_if = "Option::is_none")]
            field: Option<&'a str>,
            #[serde(skip_serializing_if = "Option::is_none")]
            details: Option<&'a Value>,
        }
        let r = match self {
            CliError::Config {
                message,
                line,
                column,
                field,
            } => Report {
                kind: "config",
                message: message.clone(),
                line: *line,
                column: *column,
                field: field.as_deref(),
                details: None,
            },
            CliError::Io(m) => Report {
                kind: "io",
                message: m.clone(),
                line: None,
                column: None,
                field: None,
                details: None,
            },
            CliError::Model(e) => Report {
                kind: model_kind(e),
                message: e.to_string(),
                line: None,
                column: None,
                field: None,
                details: None,
            },
            CliError::Invalid(v) => Report {
                kind: "validation",
                message: "stored solution fails invariant checks".into(),
                line: None,
                column: None,
                field: None,
                details: Some(v),
            },
        };
        json!({ "error": r })
    }
}

fn model_kind(e: &fiscal_default::Error) -> &'static str {
    use fiscal_default::Error as E;
    match e {
        E::NoConvergence { .. } | E::PriceLoop { .. } => "no-convergence",
        E::Io(_) => "io",
        E::Bundle(_) => "bundle",
        _ => "model",
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<fiscal_default::Error> for CliError {
    fn from(e: fiscal_default::Error) -> Self {
        CliError::from_model(e)
    }
}
