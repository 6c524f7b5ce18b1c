//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the numerical models and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A differintegral was applied to an empty sample history.
    #[error("no samples")]
    NoSamples,

    /// More samples than precomputed weights were supplied to `gl_apply`.
    #[error("weight table too short: {weights} weights for {samples} samples")]
    WeightsTooShort { weights: usize, samples: usize },

    /// Stehfest order outside the usable even range.
    #[error("invalid Stehfest order {0}: must be even and within 2..=20")]
    InvalidStehfestOrder(usize),

    /// A Laplace transform returned NaN or infinity at an evaluation point.
    #[error("transform evaluation failed at s = {s}")]
    TransformEval { s: f64 },

    /// Steady-state quantities requested for a non-convergent system.
    #[error("no steady state: drift beta = {beta} is not negative")]
    NoSteadyState { beta: f64 },

    /// The image series could not reach its term bound within the cutoff.
    #[error("series truncation: cutoff {cutoff} too small at t = {t}")]
    SeriesTruncation { cutoff: usize, t: f64 },

    /// The Eq.-style return-barrier denominator vanished.
    #[error("resonant barrier parameters at s = {s}")]
    ResonantBarrier { s: f64 },

    /// Mass conservation broke down during a two-barrier evolution.
    #[error("divergent evolution at step {step} (t = {t}): mass error {mass_error:.3e}")]
    DivergentEvolution { step: usize, t: f64, mass_error: f64 },

    /// Negative density mass beyond the tolerated inversion artifacts.
    #[error("excessive clipping: {clipped:.3e} of negative mass removed")]
    ExcessiveClipping { clipped: f64 },

    /// Invalid model parameters.
    #[error("invalid parameter {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// Configuration file could not be parsed.
    #[error("config parse error: {0}")]
    ConfigParse(String),

    /// Configuration failed validation.
    #[error("config validation error for {field}: {reason}")]
    ConfigValidation { field: String, reason: String },

    /// A preset name was not recognized.
    #[error("unknown preset \"{0}\"")]
    UnknownPreset(String),

    /// A sweep parameter name was not recognized.
    #[error("unknown sweep parameter \"{0}\"")]
    UnknownSweepParam(String),

    /// A non-finite value was about to be written to an output file.
    #[error("refusing to write non-finite value in column {column}")]
    NonFiniteOutput { column: &'static str },

    /// A replication failed inside an ensemble run.
    #[error("replication {index} failed: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code for the CLI: 2 for configuration problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigParse(_)
            | Error::ConfigValidation { .. }
            | Error::UnknownPreset(_)
            | Error::UnknownSweepParam(_)
            | Error::InvalidParameter { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
