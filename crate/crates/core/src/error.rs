use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("elements belong to incompatible field contexts")]
    IncompatibleContexts,
    #[error("element is not a square")]
    NotASquare,
    #[error("polynomial is reducible")]
    ReduciblePolynomial,
    #[error("tower depth exceeded: {0}")]
    TowerDepthExceeded(String),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("linear system has no solution")]
    NoSolution,
    #[error("quadratic form is degenerate")]
    DegenerateForm,
    #[error("field too small: {0}")]
    FieldTooSmall(String),
    #[error("irregular instance: {0}")]
    Irregular(String),
    #[error("zero eigenvalue")]
    ZeroEigenvalue,
    #[error("matrix has no square root: {0}")]
    NoSquareRoot(String),
    #[error("loop budget exceeded: {0}")]
    LoopBudgetExceeded(String),
    #[error("genericity failure: {0}")]
    GenericityFailure(String),
    #[error("enumeration too large: {0}")]
    TooLarge(String),
    #[error("system is not a polynomial in p-th powers")]
    NotAPthPower,
    #[error("not a product of linear forms")]
    NotAProduct,
    #[error("unlucky random restriction")]
    UnluckyRestriction,
    #[error("unsupported instance kind: {0}")]
    UnsupportedKind(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
