use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands have incompatible shapes (tensor dims, factor ranks, ...).
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// Input is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value or combination of values is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The sampler produced a non-finite log-posterior.
    #[error("sampler divergence: {0}")]
    Divergence(String),

    /// A single estimation trial failed; carries its grid position.
    #[error("trial failed (truth redraw {redraw}, dataset {dataset}): {source}")]
    Trial {
        redraw: usize,
        dataset: usize,
        #[source]
        source: Box<Error>,
    },

    /// A case analysis that should be exhaustive fell through.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A config or data file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True if this error (or the root cause of a trial failure) is a
    /// sampler divergence. Used to pick the process exit code.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence(_) => true,
            Error::Trial { source, .. } => source.is_divergence(),
            _ => false,
        }
    }

    pub(crate) fn trial(redraw: usize, dataset: usize, source: Error) -> Error {
        Error::Trial {
            redraw,
            dataset,
            source: Box::new(source),
        }
    }
}
