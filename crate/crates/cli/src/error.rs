use std::io;
use std::path::PathBuf;

use regstop_core::asymptotics::AsymptoticError;
use regstop_core::params_file::ParamsFileError;
use regstop_core::{ModelError, SimError, SolveError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read `{}`: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write `{}`: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
    #[error("{0}")]
    ParamsFile(#[from] ParamsFileError),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Solve(#[from] SolveError),
    #[error("{0}")]
    Simulation(#[from] SimError),
    #[error("{0}")]
    Asymptotic(#[from] AsymptoticError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Read { .. } | CliError::Write { .. } => "io",
            CliError::ParamsFile(_) => "params-file",
            CliError::Model(_) => "validation",
            CliError::Solve(SolveError::Model(_)) => "validation",
            CliError::Solve(_) => "solve",
            CliError::Simulation(_) => "simulation",
            CliError::Asymptotic(_) => "asymptotics",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            CliError::ParamsFile(e) => e.field(),
            CliError::Model(e)
            | CliError::Solve(SolveError::Model(e))
            | CliError::Asymptotic(AsymptoticError::Model(e)) => e.field(),
            _ => None,
        }
    }
}
