//! Error type shared across the kernel.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CoreError {
    #[error("syntax error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("undeclared symbol `{name}` at offset {pos}")]
    UndeclaredSymbol { name: String, pos: usize },

    #[error("degree mismatch: expected {expected}, found {found} ({context})")]
    DegreeMismatch {
        expected: i64,
        found: i64,
        context: String,
    },

    #[error("generator signatures differ ({context})")]
    SignatureMismatch { context: String },

    #[error("unknown generator or coordinate `{name}`")]
    UnknownGenerator { name: String },

    #[error("matrix shape mismatch: {context}")]
    ShapeMismatch { context: String },

    #[error("entry at ({row},{col}) has nonzero degree {degree}, expected degree zero")]
    NonzeroDegreeEntry { row: usize, col: usize, degree: i64 },

    #[error("function has nonzero degree {degree}; only degree-zero functions are invertible")]
    NonzeroDegree { degree: i64 },

    #[error("degree-zero part (body) is zero; not invertible")]
    ZeroBody,

    #[error("singular body: determinant of the degree-zero block vanishes at sample point {point}")]
    SingularBody { point: String },

    #[error("division by zero: denominator vanishes at {point}")]
    DomainError { point: String },

    #[error("missing overlap between charts `{a}` and `{b}`")]
    MissingOverlap { a: String, b: String },

    #[error("bundles live over different atlases ({context})")]
    AtlasMismatch { context: String },

    #[error("no chart assignment covers chart `{chart}`")]
    ChartAssignmentGap { chart: String },

    #[error("unknown chart `{name}`")]
    UnknownChart { name: String },

    #[error("{msg}")]
    Invalid { msg: String },
}

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::Invalid { msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
