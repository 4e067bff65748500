use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid vertex pair ({0}, {1})")]
    InvalidPair(usize, usize),

    #[error("vertex {vertex} out of range for n = {n}")]
    InvalidVertex { vertex: usize, n: usize },

    #[error("colour {colour} out of range for r = {r}")]
    InvalidColour { colour: usize, r: usize },

    #[error("book spine and pages overlap")]
    InvalidBook,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty vertex set where a non-empty one is required")]
    EmptySet,

    #[error("minimum density in colour {colour} is zero")]
    DegenerateDensity { colour: usize },

    #[error("{lemma} violated: {detail}")]
    LemmaViolation { lemma: String, detail: String },

    #[error("tensor of order {order} over dimension {dim} exceeds the configured cap")]
    TensorTooLarge { order: usize, dim: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("instance too large for exact search: {0}")]
    ScaleError(String),
}

impl Error {
    pub(crate) fn violation(lemma: &str, detail: impl Into<String>) -> Self {
        Error::LemmaViolation {
            lemma: lemma.to_string(),
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
