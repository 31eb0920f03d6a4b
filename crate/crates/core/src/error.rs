use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or site outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The state admits no further events (extinct, or fixated on a window).
    #[error("absorbed state: no discordant pairs")]
    Absorbed,
    #[error("no surviving replicates out of {attempts} attempts")]
    NoSurvivors { attempts: usize },
    #[error("invalid stop condition: {0}")]
    StopCondition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
