use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("element {element} is inverted")]
    InvertedElement { element: usize },

    #[error("unknown node set `{0}`")]
    UnknownNodeSet(String),

    #[error("unknown element set `{0}`")]
    UnknownElementSet(String),

    #[error("contact pair ({a}, {b}) lies on a single body side")]
    ContactSameSide { a: usize, b: usize },

    #[error("interface {interface} is degenerate")]
    DegenerateInterface { interface: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("univariate bracket failure: {0}")]
    Bracket(String),

    #[error("trust-region iteration limit ({0}) reached")]
    IterationLimit(usize),

    #[error("trust radius underflow")]
    RadiusUnderflow,

    #[error("phase one did not reach a feasible start after {escalations} escalations")]
    PhaseOne { escalations: usize },

    #[error("starting point is infeasible")]
    InfeasibleStart,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
