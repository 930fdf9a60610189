use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("factorization of M + {alpha}*A failed at row {row}")]
    Factorization { alpha: f64, row: usize },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("time levels are not nested: {0}")]
    LevelsNotNested(String),
    #[error("sub-mesh of 2^{exponent} points per path is not representable")]
    SubMeshOverflow { exponent: u32 },
    #[error("unknown problem `{0}` (expected test1, test2 or deterministic)")]
    UnknownProblem(String),
    #[error("invalid scheme configuration: {0}")]
    InvalidScheme(String),
    #[error("Picard iteration did not converge in {iterations} iterations (last relative change {change:.3e})")]
    PicardDiverged { iterations: usize, change: f64 },
    #[error("theta = 1/2 step requires the lagged field u^(n-1)")]
    MissingLag,
    #[error("increment grid ({found} steps) does not match the scheme grid ({expected} steps)")]
    GridMismatch { expected: usize, found: usize },
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("sample {sample}, level N={level}: {source}")]
    Sample {
        sample: u64,
        level: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid experiment configuration: {0}")]
    InvalidExperiment(String),
    #[error("convergence order needs strictly positive errors, got {0}")]
    NonPositiveError(f64),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_sample(self, sample: u64, level: usize) -> Error {
        Error::Sample {
            sample,
            level,
            source: Box::new(self),
        }
    }
}
