use thiserror::Error;

/// Errors raised across the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A degree or index exceeds the supported range.
    #[error("range error: {0}")]
    Range(String),

    /// A documented precondition (grid density, window containment, ...) does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The phantom is unusable, e.g. `gamma` vanishes where the susceptibility does not.
    #[error("degenerate phantom: {0}")]
    DegeneratePhantom(String),

    /// A linear solve failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed data container: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// Failure inside one stage of an experiment run.
    #[error("stage `{stage}` failed")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
