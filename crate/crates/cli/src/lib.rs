//! Batch front end: TOML model files in, CSV time series out.

pub mod expr;
pub mod model;
pub mod run;
pub mod table;

use thiserror::Error;

pub use model::{parse_model, validate, ModelFile, ModelSpec, SolverKind};
pub use run::run_model;
pub use table::{write_csv, ResultTable};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid model: {0}")]
    Validation(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Solver(_) | CliError::Io(_) => 2,
        }
    }
}
