use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong in this crate, split by what the caller can
/// do about it: `InvalidParameter`-style variants mean the inputs were bad
/// (fix the configuration), the rest mean a computation did not reach its
/// target (refine the grid, relax a tolerance, or report a genuine failure).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative density {0} passed to a growth map; densities must be nonnegative")]
    NegativeDensity(f64),

    #[error("reaction term vanishes inside the integration interval (near u = {0}); the season integral is singular")]
    SingularIntegrand(f64),

    #[error("trajectory diverged at cycle {cycle}: |u| exceeded {limit:e}")]
    Divergence { cycle: usize, limit: f64 },

    #[error("grid too coarse on axis {axis}: {got} cells, need at least {need}")]
    Resolution { axis: usize, got: usize, need: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid mask file {path}: {reason}")]
    MaskFormat { path: PathBuf, reason: String },

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True when the error is the caller's fault (bad inputs or files), as
    /// opposed to a numeric computation that failed to converge. The CLI maps
    /// the former to exit code 2 and the latter to exit code 3.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::NegativeDensity(_)
                | Error::Resolution { .. }
                | Error::Unsupported(_)
                | Error::MaskFormat { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
