//! Exit codes and the one-line JSON error object.

use serde::Serialize;
use serde_json::{json, Value};

use sodec_core::{Error, ErrorKind};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Config,
    Numeric,
    Io,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
    pub details: Option<Value>,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Config,
            message: message.into(),
            details: None,
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Numeric,
            message: message.into(),
            details: None,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Io,
            message: message.into(),
            details: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Config => EXIT_CONFIG,
            FailureKind::Numeric => EXIT_NUMERIC,
            FailureKind::Io => EXIT_IO,
        }
    }

    pub fn to_json_line(&self) -> String {
        let mut obj = json!({ "error": { "kind": self.kind, "message": self.message } });
        if let Some(d) = &self.details {
            obj["error"]["details"] = d.clone();
        }
        obj.to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let details = match &e {
            Error::Validation(report) => serde_json::to_value(report).ok(),
            _ => None,
        };
        let kind = match e.kind() {
            ErrorKind::Config => FailureKind::Config,
            ErrorKind::Numeric => FailureKind::Numeric,
        };
        Self {
            kind,
            message: e.to_string(),
            details,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sodec_core::model::{validated, ModelParams};

    #[test]
    fn validation_error_is_config_with_violations() {
        let err = validated(ModelParams::single_mode(-1.0, 1.0, 0.1)).unwrap_err();
        let f = Failure::from(err);
        assert_eq!(f.exit_code(), EXIT_CONFIG);
        let line = f.to_json_line();
        assert!(!line.contains('\n'));
        let v: Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["error"]["kind"], "config");
        assert_eq!(
            v["error"]["details"]["violations"][0]["kind"],
            "non_positive_omega_e"
        );
    }
}
