use thiserror::Error;

pub type Result<T, E = PlaceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PlaceError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("line {line}: net `{net}` references unknown pin `{pin}`")]
    DanglingPin { line: usize, net: String, pin: String },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("net `{0}` crosses dies but has no HBT")]
    MissingHbt(String),

    #[error("net `{0}` does not cross dies but has an HBT")]
    UnexpectedHbt(String),

    #[error("net `{0}` has more than one HBT")]
    DuplicateHbt(String),

    #[error("instance `{0}` is a standard cell and cannot be rotated")]
    RotateCell(String),

    #[error("non-finite gradient at iteration {iteration} (object {object})")]
    NonFinite { iteration: usize, object: String },

    #[error("legalization failed on the {die} die: {msg}")]
    Legalize { die: crate::model::Die, msg: String },

    #[error("{stage}: {inner}")]
    Stage { stage: &'static str, inner: Box<PlaceError> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PlaceError {
    pub fn syntax(line: usize, msg: impl Into<String>) -> Self {
        PlaceError::Syntax { line, msg: msg.into() }
    }

    /// Wraps the error with the name of the flow stage that raised it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        PlaceError::Stage { stage, inner: Box::new(self) }
    }

    /// Innermost error, skipping stage tags.
    pub fn root(&self) -> &PlaceError {
        match self {
            PlaceError::Stage { inner, .. } => inner.root(),
            e => e,
        }
    }
}
