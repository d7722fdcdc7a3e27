//! Experiment runner behind the `curveflow` binary: configuration files,
//! figure presets, run artifacts, convergence studies, parameter sweeps and
//! SVG plots.

pub mod commands;
pub mod config;
pub mod expr;
pub mod presets;
pub mod runner;
pub mod svg;

use std::fmt;

/// CLI failure, classified by exit status.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad configuration or arguments; exit status 2.
    Validation(String),
    /// The solver failed during a run; exit status 3.
    Numerical(String),
    /// Reading or writing files failed; exit status 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
