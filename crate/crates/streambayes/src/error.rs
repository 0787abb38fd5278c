//! Crate-wide error type.
//!
//! Every fallible operation in the library reports through [`Error`]. The
//! variants are grouped by origin: model validation, data parsing, the
//! exponential-family algebra, and the inference/learning engines. The CLI
//! maps each group onto a process exit code via [`Error::exit_code`].

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A structural or parametric rule was violated by a network definition.
    /// Names the first offending variable and the rule that failed.
    #[error("validation failed for `{variable}`: {rule}")]
    Validation { variable: String, rule: String },

    /// An operation needed a value for a variable that the assignment lacks.
    #[error("missing value for variable `{0}`")]
    MissingValue(String),

    /// A distribution parameter is outside its domain (e.g. variance <= 0).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A variable name was not found in the model.
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    /// Two variables or attributes share a name.
    #[error("duplicate name `{0}`")]
    DuplicateName(String),

    /// Malformed input text; `line` is 1-based within the source.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Data header and model expectations disagree.
    #[error("schema error: {0}")]
    Schema(String),

    /// Sequence/time ordering of a dynamic stream is broken.
    #[error("order error: {0}")]
    Order(String),

    /// A variable or attribute has the wrong state space for an operation.
    #[error("type error: {0}")]
    TypeMismatch(String),

    /// An exponential-family parameter vector is outside the valid domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Sufficient statistics do not match the prior family.
    #[error("conjugacy error: {0}")]
    Conjugacy(String),

    /// A computation produced a non-finite or otherwise unusable value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Evidence has zero probability under the model (all weights vanished).
    #[error("degenerate evidence: total weight is zero")]
    DegenerateEvidence,

    /// A problem exceeds a hard resource bound (e.g. enumeration size).
    #[error("problem too large: {0}")]
    TooLarge(String),

    /// An option or configuration value is missing or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A model template was asked to build over an empty attribute set.
    #[error("empty model: no variables to learn")]
    EmptyModel,

    /// Builder produced an inconsistent structure (cycle, bad link, ...).
    #[error("structure error: {0}")]
    Structure(String),

    /// The posterior mean of a variance is undefined (Gamma shape <= 1).
    #[error("variance posterior mean undefined for `{variable}` (shape <= 1)")]
    UndefinedVarianceMean { variable: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// JSON emission failed (read-side JSON problems surface as `Parse`).
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end:
    /// 1 for usage problems, 2 for data/model errors, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Numerical(_) | Error::DegenerateEvidence | Error::UndefinedVarianceMean { .. } => 3,
            _ => 2,
        }
    }
}
