// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

//! Command implementations behind the `bosonic-saddle` binary. Each command
//! renders its full output as a string so it can be tested without a process.

pub mod commands;
pub mod input;
pub mod sweep;

use bosonic_saddle::Error;
use thiserror::Error as ThisError;

pub const SCHEMA: &str = "v1";
pub const CSV_HEADER: &str = "# bosonic-saddle sweep v1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COALESCING: i32 = 3;
pub const EXIT_NO_SADDLES: i32 = 4;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NoSaddles(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::NoSaddles(_) => EXIT_NO_SADDLES,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoSaddlesFound | Error::NoConvergence | Error::DegenerateSaddle { .. } => CliError::NoSaddles(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// Rendered stdout plus exit code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    pub fn ok(stdout: String) -> Self {
        Outcome { stdout, code: EXIT_OK }
    }
}

/// Shortest round-trip float text, empty for missing or non-finite values.
pub(crate) fn cell(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => String::new(),
    }
}

pub(crate) fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values always serialize");
    s.push('\n');
    s
}
