//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of state preparation, jump application, and the
/// experiment driver.
///
/// `is_computation` distinguishes errors that arise from a physically
/// degenerate input (nothing to subtract, no accepted trials) from plain
/// argument validation; the CLI maps the two classes to different exit
/// codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mean photon number must be positive, got {0}")]
    NonPositiveMeanPhotons(f64),

    #[error("coherent amplitude too large: |alpha|^2 = {0} exceeds the supported 50")]
    AmplitudeTooLarge(f64),

    #[error("squeeze parameter too large: sinh^2(r) = {0} exceeds the supported 25")]
    SqueezeTooLarge(f64),

    #[error("squeeze parameter must be non-negative, got {0}")]
    NegativeSqueeze(f64),

    #[error("Fock level {level} does not fit in dimension {dim}")]
    FockLevelTooLarge { level: usize, dim: usize },

    #[error("truncation dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("truncation dimension {requested} exceeds the hard cap {cap}")]
    DimensionTooLarge { requested: usize, cap: usize },

    #[error("tail tolerance {tolerance:.3e} needs dimension above the hard cap {cap}")]
    TailNeedsTooManyLevels { tolerance: f64, cap: usize },

    #[error("tail tolerance must be in (0, 1), got {0}")]
    BadTailTolerance(f64),

    #[error("interaction phase y must be positive and finite, got {0}")]
    BadInteractionPhase(f64),

    #[error("family exponent beta must lie in [0, 1/2], got {0}")]
    BadFamilyExponent(f64),

    #[error("the number-count model J rho = n rho n has no lowering operator")]
    NotALoweringModel,

    #[error("jump weight {0:.3e} is below threshold; the state has no photon to subtract")]
    ZeroJumpWeight(f64),

    #[error("post-jump mean has no closed form for model {0}; only A and E are supported")]
    MeanFormulaUnavailable(String),

    #[error("post-jump mean is undefined: {0}")]
    DegenerateMean(String),

    #[error("chi_1 = {0} admits no thermal state: need 0 < chi_1 <= 1/4")]
    NoThermalBranch(f64),

    #[error("sweep grid is invalid: {0}")]
    BadGrid(String),

    #[error("simulation produced no accepted trials out of {0}")]
    NoAcceptedTrials(u64),

    #[error("discrimination needs at least one candidate model")]
    NoCandidates,

    #[error("trial count must be positive")]
    ZeroTrials,

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed table: {0}")]
    BadTable(String),
}

impl Error {
    /// True for errors that signal a degenerate computation on valid input,
    /// as opposed to argument validation failures.
    pub fn is_computation(&self) -> bool {
        matches!(
            self,
            Error::ZeroJumpWeight(_)
                | Error::NoAcceptedTrials(_)
                | Error::DegenerateMean(_)
        )
    }
}
