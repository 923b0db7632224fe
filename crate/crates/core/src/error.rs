use std::path::PathBuf;

use thiserror::Error;

/// A violated invariant of a problem description or of the grid inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("domain half-length must be positive, got {0}")]
    NonPositiveHalfLength(f64),
    #[error("time horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("at least 2 spatial cells are required, got {0}")]
    TooFewCells(usize),
    #[error("at least 1 time step is required, got {0}")]
    TooFewSteps(usize),
    #[error("interval [{a}, {b}] is empty or reversed")]
    EmptyInterval { a: f64, b: f64 },
    #[error("interval [{a}, {b}] contains no cell center of the domain")]
    IntervalOutsideDomain { a: f64, b: f64 },
    #[error("sampler returned a non-finite value in cell {cell}")]
    NonFiniteSample { cell: usize },
    #[error("cell diffusion Du must be positive, got {0}")]
    NonPositiveCellDiffusion(f64),
    #[error("chemical diffusion Dv must be positive, got {0}")]
    NonPositiveChemicalDiffusion(f64),
    #[error("chemotactic sensitivity chi must be finite and non-negative, got {0}")]
    InvalidChemotaxis(f64),
    #[error("degradation rate lambda must be non-negative, got {0}")]
    NegativeDegradation(f64),
    #[error("production rate mu must be non-negative, got {0}")]
    NegativeProduction(f64),
    #[error("permeability must be positive, got sigma = {0}")]
    NonPositivePermeability(f64),
    #[error("cost weight {name} must be non-negative, got {value}")]
    NegativeWeight { name: &'static str, value: f64 },
    #[error("negative initial cell density {value} in cell {cell}")]
    NegativeInitialDensity { cell: usize, value: f64 },
    #[error("negative initial chemical concentration {value} in cell {cell}")]
    NegativeInitialChemical { cell: usize, value: f64 },
    #[error("non-finite initial data in cell {cell}")]
    NonFiniteInitialData { cell: usize },
    #[error("observation region is empty")]
    EmptyObservation,
    #[error("boundary control is active but no endpoint is controlled")]
    NoControlledEndpoint,
    #[error("target state is not finite at step {step}, cell {cell}")]
    NonFiniteTarget { step: usize, cell: usize },
    #[error("{what} has {got} entries, expected {expected}")]
    Length {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("Adam parameter {name} out of range: {value}")]
    AdamParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("dominance breakdown at row {row} (pivot {pivot:e})")]
    DominanceBreakdown { row: usize, pivot: f64 },
    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("optimizer iteration {iter}: {source}")]
    Iteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("config: {0}")]
    Config(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at_step(step: usize, source: Error) -> Self {
        Error::Step {
            step,
            source: Box::new(source),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than by a failed run.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Config(_) | Error::UnknownPreset(_) | Error::Parse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
