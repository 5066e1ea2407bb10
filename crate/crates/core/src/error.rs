use thiserror::Error;

/// Errors produced by the tree, kernel and experiment routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("branching number q must be at least 2, got {0}")]
    InvalidBranching(u32),

    #[error("letter {letter} at position {position} is outside 0..{q}")]
    LetterOutOfRange { position: usize, letter: u32, q: u32 },

    #[error("non-canonical vertex: first letter of a word under p^{h}(o) must not be 0 (position 0 holds the ray child)")]
    NonCanonical { h: u64 },

    #[error("cannot parse vertex {input:?}: {reason}")]
    Parse { input: String, reason: String },

    #[error("invalid trapezoid: {0}")]
    InvalidTrapezoid(String),

    #[error("invalid kernel query: {0}")]
    InvalidQuery(String),

    #[error("negative or non-finite time {0}")]
    InvalidTime(f64),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds tolerance {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("tail extrapolation failed: local decay exponent {exponent:.3} is not close to -2")]
    TailExtrapolation { exponent: f64 },

    #[error("truncation radius {radius} is too small (need at least {required})")]
    InsufficientRadius { radius: u64, required: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, TreeError>;
