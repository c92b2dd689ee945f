use thiserror::Error;

/// Errors shared by every subsystem of the crate.
#[derive(Error, Debug)]
pub enum Error {
    /// A parameter is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A lattice or grid index is out of range.
    #[error("range error: {0}")]
    Range(String),

    /// Inputs violate a documented calling contract (mismatched grids,
    /// inconsistent scales, wrong boundary data shape).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An operation is deliberately not supported at these parameters.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Every importance weight vanished; no conclusion can be drawn.
    #[error("degenerate sample: all importance weights are -inf")]
    DegenerateSample,

    /// A rejection sampler ran out of attempts.
    #[error("sampling failure: {attempts} rejections (acceptance rate ~{rate:.2e})")]
    SamplingFailure { attempts: u64, rate: f64 },

    /// A Markov chain showed no movement over a full sweep window.
    #[error("mixing failure: zero acceptance over {0} proposals")]
    MixingFailure(u64),

    /// Numeric routine failed to converge (bracket/inverse-CDF failures).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An unknown experiment name was requested.
    #[error("unknown experiment: {0}")]
    UnknownExperiment(String),

    /// Malformed configuration input.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
