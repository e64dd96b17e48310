use thiserror::Error;

#[derive(Debug, Error)]
pub enum CollapseError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid parameters: {0}")]
    Parameters(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CollapseError>;
