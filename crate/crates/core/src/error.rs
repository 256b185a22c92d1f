use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Model,
    Usage,
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorClass::Data => f.write_str("data"),
            ErrorClass::Model => f.write_str("model"),
            ErrorClass::Usage => f.write_str("usage"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("no usable rows ({dropped} dropped for missing cells)")]
    NoUsableRows { dropped: usize },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` has unequal length")]
    RaggedColumn(String),
    #[error("invalid value for `{var}`: {reason}")]
    InvalidValue { var: String, reason: String },
    #[error("invalid roles: {0}")]
    InvalidRoles(String),
    #[error("numeric variable `{0}` has zero range")]
    ZeroRange(String),
    #[error("all variables are constant; distances are undefined")]
    AllConstant,
    #[error("invalid schema override: {0}")]
    SchemaOverride(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("singular design: column `{column}` is collinear with {with:?}")]
    Singular { column: String, with: Vec<String> },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("external model unreachable: {0}")]
    Unreachable(String),
    #[error("external model timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("malformed model response: {0}")]
    MalformedResponse(String),
    #[error("density is zero over the whole section grid")]
    ZeroDensity,

    #[error("k = {k} exceeds the {distinct} distinct rows")]
    TooFewDistinct { k: usize, distinct: usize },
    #[error("{0} needs at least two models")]
    NeedTwoModels(&'static str),
    #[error("{0} needs a numeric response")]
    NeedNumericResponse(&'static str),
    #[error("no response variable designated")]
    NoResponse,
    #[error("operation cancelled")]
    Cancelled,
    #[error("tour step {step} out of range (tour has {len} points)")]
    StepOutOfRange { step: usize, len: usize },
    #[error("no active tour")]
    NoTour,
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            SchemaMismatch(_) | Singular { .. } | InvalidModel(_) | Unreachable(_) | Timeout(_)
            | MalformedResponse(_) | ZeroDensity | UnknownModel(_) => ErrorClass::Model,
            InvalidArgument(_) | InvalidRoles(_) | StepOutOfRange { .. } | NoTour | UnknownSession(_)
            | NeedTwoModels(_) | NoResponse | Cancelled => ErrorClass::Usage,
            _ => ErrorClass::Data,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
