use evodiff::{EssError, GameError, GraphError, SimError};

/// Failures after argument parsing. Parse errors themselves are reported by
/// clap with exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid parameters or input data.
    #[error("{0}")]
    Precondition(String),
    /// I/O or sampling failures.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Precondition(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Io(_) | GraphError::SamplingFailed { .. } | GraphError::Invariant(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<EssError> for CliError {
    fn from(e: EssError) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Graph(g) => g.into(),
            SimError::Game(g) => g.into(),
            SimError::Config(_) => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
