use elastica::ElasticError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] ElasticError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("fit did not converge after {0} iterations")]
    NotConverged(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Core(ElasticError::RankDeficient(_) | ElasticError::DegreesOfFreedom { .. }) => 3,
            CliError::NotConverged(_) => 4,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}
