use thiserror::Error;

/// Errors raised by the differentiation kernel, the linear solves and the
/// iterative solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A numeric parameter violates its documented range.
    #[error("{name} must satisfy {constraint} (got {value})")]
    InvalidParameter {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("index {index} out of range for dimension {len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// A function evaluation returned a non-finite value. `row` names the
    /// residual component and `column` the differentiated coordinate, when known.
    #[error("non-finite evaluation at {point:?}{}", location(*row, *column))]
    NonFiniteEvaluation {
        point: Vec<f64>,
        row: Option<usize>,
        column: Option<usize>,
    },

    #[error("non-finite input in {0}")]
    NonFiniteInput(&'static str),

    /// The damped normal equations could not be factorized.
    #[error("singular system (pivot {pivot} not positive); increase lambda and retry")]
    SingularSystem { pivot: usize },

    #[error("unknown problem {name:?}; available: {catalog}")]
    UnknownProblem { name: String, catalog: String },

    #[error("invalid problem parameter {key:?}: {reason}")]
    InvalidProblemParam { key: String, reason: String },
}

fn location(row: Option<usize>, column: Option<usize>) -> String {
    match (row, column) {
        (Some(r), Some(c)) => format!(" (row {r}, column {c})"),
        (Some(r), None) => format!(" (row {r})"),
        (None, Some(c)) => format!(" (coordinate {c})"),
        (None, None) => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_param(
    ok: bool,
    name: &'static str,
    constraint: &'static str,
    value: f64,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            constraint,
            value,
        })
    }
}
