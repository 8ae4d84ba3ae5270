use std::fmt;

use serde::Serialize;
use tsx_core::Error;

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_MODEL: i32 = 4;
pub const EXIT_EXPLAIN: i32 = 5;

/// A command failure with its exit code and a machine-readable error code.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub exit_code: i32,
    pub code: String,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: &'a str,
}

impl Failure {
    fn new(exit_code: i32, code: &str, message: String) -> Self {
        Failure {
            exit_code,
            code: code.to_string(),
            message,
        }
    }

    pub fn usage(message: String) -> Self {
        Failure::new(EXIT_USAGE, "BadParams", message)
    }

    pub fn data(e: Error) -> Self {
        Failure::new(EXIT_DATA, e.code(), e.to_string())
    }

    pub fn model(e: Error) -> Self {
        Failure::new(EXIT_MODEL, e.code(), e.to_string())
    }

    pub fn io(e: impl fmt::Display) -> Self {
        Failure::new(EXIT_IO, "Io", e.to_string())
    }

    /// Errors raised while an explainer runs: model faults keep their own
    /// exit code, rejected hyperparameters are usage errors.
    pub fn explain(e: Error) -> Self {
        let exit = match e {
            Error::SpawnError(_)
            | Error::ProtocolError(_)
            | Error::ModelTimeout(_)
            | Error::InvalidProbabilities(_) => EXIT_MODEL,
            Error::BadParams(_) | Error::BadK { .. } => EXIT_USAGE,
            _ => EXIT_EXPLAIN,
        };
        Failure::new(exit, e.code(), e.to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorJson {
            error: &self.code,
            message: &self.message,
        })
        .expect("plain strings serialize")
    }
}
