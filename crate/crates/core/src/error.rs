use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("invalid rank {rank}: must be between 1 and {max}")]
    InvalidRank { rank: usize, max: usize },
    #[error("subspace iteration did not converge after {iterations} passes (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },
    #[error("gram matrix is singular or indefinite (pivot {pivot:e}); factors have collapsed")]
    SingularGram { pivot: f64 },
    #[error("iterates diverged to non-finite values")]
    Diverged,
    #[error("invalid threshold {0}: must be finite and nonnegative")]
    InvalidThreshold(f64),
    #[error("invalid fraction {0}: must lie in [0, 1]")]
    InvalidFraction(f64),
    #[error("oracle schedule requires the ground-truth low-rank matrix")]
    MissingGroundTruth,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("training diverged at stage {stage}: loss is {loss}")]
    TrainingDiverged { stage: usize, loss: f64 },
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("format error: {0}")]
    FormatError(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
