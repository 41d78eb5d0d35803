//! Error and warning types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("matrix in {context} is rank deficient (min singular value {sigma_min:.3e} < {threshold:.3e})")]
    Rank {
        context: &'static str,
        sigma_min: f64,
        threshold: f64,
    },

    #[error("Gram matrix is singular or ill-conditioned (condition number {cond:.3e}); drop collinear columns or add a ridge term")]
    SingularGram { cond: f64 },

    #[error("not enough samples in {context}: need at least {needed}, got {got}")]
    InsufficientSamples {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("coordinate descent did not converge for row {row} after {iters} sweeps (last max update {last_delta:.3e})")]
    Convergence {
        row: usize,
        iters: usize,
        last_delta: f64,
        last_iterate: Vec<f64>,
    },

    #[error("lag order {k0} outside valid range 1..={max} for {t} observations")]
    Lag { k0: usize, max: usize, t: usize },

    #[error("linear algebra failure in {context}: {message}")]
    LinAlg {
        context: &'static str,
        message: String,
    },

    #[error("no usable signal: all eigenvalues at or below the floor {floor:.3e}")]
    NoSignal { floor: f64 },

    #[error("projection is ill-conditioned: min singular value of U2'A1 is {sigma_min:.3e} (threshold {threshold:.3e})")]
    IllConditionedProjection { sigma_min: f64, threshold: f64 },

    #[error("degenerate input in {context}: {message}")]
    DegenerateInput {
        context: &'static str,
        message: String,
    },

    #[error("numerical overflow in {context}: non-finite value at step {step}")]
    NumericalOverflow { context: &'static str, step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {path} at row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

/// Non-fatal conditions surfaced alongside results.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Warning {
    /// Eigenvalue gap at the split position is below resolution; the
    /// returned subspace split is arbitrary within the tied block.
    DegenerateGap { position: usize, gap: f64 },
    /// A rank-correlation input column was constant; its entries were set to 0.
    DegenerateColumn { column: usize },
    /// The sequential test hit the iteration cap without a non-rejection.
    CapReached { cap: usize },
    /// The projected covariance is numerically zero: no spiked noise
    /// directions exist and the projection frame falls back to the loading
    /// frame (shat = 0).
    NoSpikes,
    /// Fitted transition matrix has spectral radius >= 1; forecasts may diverge.
    UnstableVar { spectral_radius: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::DegenerateGap { position, gap } => write!(
                f,
                "eigenvalue gap at position {position} is {gap:.3e}; split is arbitrary within the tied block"
            ),
            Warning::DegenerateColumn { column } => {
                write!(f, "column {column} is constant; rank correlations set to 0")
            }
            Warning::CapReached { cap } => {
                write!(f, "sequential test reached the cap of {cap} hypotheses without a non-rejection")
            }
            Warning::NoSpikes => {
                write!(f, "projected covariance is numerically zero; no spiked noise directions (shat = 0)")
            }
            Warning::UnstableVar { spectral_radius } => {
                write!(f, "VAR transition has spectral radius {spectral_radius:.4} >= 1")
            }
        }
    }
}
