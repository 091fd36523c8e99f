use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel evaluated at zero separation")]
    ZeroSeparation,

    #[error("stack period does not tile the box: {0}")]
    IncommensurateStack(String),

    #[error("image sum did not converge within {max_images} images (last change {last_change:e})")]
    StackNotConverged { max_images: usize, last_change: f64 },

    #[error("direct summation refused: {cells} cells exceeds cap {cap}")]
    DirectSumTooLarge { cells: usize, cap: usize },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("imaginary-time solver did not converge in {iterations} iterations (last relative change {last_change:e})")]
    NotConverged { iterations: usize, last_change: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("field format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
