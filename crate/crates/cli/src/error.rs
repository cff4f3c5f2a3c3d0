use std::path::PathBuf;

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", bad_config(.line, .msg))]
    BadConfig { line: Option<usize>, msg: String },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("infeasible regime: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(#[from] cbfed_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn bad_config(line: &Option<usize>, msg: &str) -> String {
    match line {
        Some(l) => format!("bad config (line {l}): {msg}"),
        None => format!("bad config: {msg}"),
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Solver(cbfed_core::Error::NotContractive(_)) => 2,
            CliError::Solver(_) | CliError::Io { .. } => 3,
            CliError::BadConfig { .. } => 4,
        }
    }
}
