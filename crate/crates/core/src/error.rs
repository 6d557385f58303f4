use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("star graph needs at least 3 spokes, got {0}")]
    Size(usize),

    #[error("vertex {vertex} is outside 1..={n_spokes}")]
    Index { vertex: usize, n_spokes: usize },

    #[error("extra edge joins vertex {0} to itself")]
    SelfEdge(usize),

    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Semantic(String),

    #[error("{0}")]
    Config(String),

    #[error("invariant subspace exceeded {cap} vectors")]
    SubspaceTooLarge { cap: usize },

    #[error("basis is not invariant: residual {residual:.3e}")]
    NotInvariant { residual: f64 },

    #[error("dense dimension {dim} exceeds cap {cap}")]
    DenseTooLarge { dim: usize, cap: usize },

    #[error("{0}")]
    Numerical(String),

    #[error("no hitting-time formula for anomaly `{0}`")]
    NoPrediction(&'static str),

    #[error("graph has no anomaly to find")]
    NothingToFind,

    #[error("ambiguous eigenphase matching: {0}")]
    Matching(String),

    #[error("only {usable} usable points for branch {branch:.6}, need at least 4")]
    InsufficientData { branch: f64, usable: usize },
}

impl Error {
    /// Short machine-readable category, used as `error:<category>:` by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Size(_) => "size",
            Error::Index { .. } => "index",
            Error::SelfEdge(_) => "self_edge",
            Error::Syntax { .. } => "syntax",
            Error::Semantic(_) => "semantic",
            Error::Config(_) => "config",
            Error::SubspaceTooLarge { .. } => "subspace_too_large",
            Error::NotInvariant { .. } => "not_invariant",
            Error::DenseTooLarge { .. } => "size",
            Error::Numerical(_) => "numerical",
            Error::NoPrediction(_) => "no_prediction",
            Error::NothingToFind => "nothing_to_find",
            Error::Matching(_) => "matching",
            Error::InsufficientData { .. } => "insufficient_data",
        }
    }

    /// Failures of numerical certification, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SubspaceTooLarge { .. }
                | Error::NotInvariant { .. }
                | Error::Numerical(_)
                | Error::Matching(_)
                | Error::InsufficientData { .. }
        )
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
