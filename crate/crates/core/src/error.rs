use std::ops::Range;

use thiserror::Error;

use crate::parser::ParseError;
use crate::program::Violation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("unknown joint `{name}` (nearest: {})", suggestions.join(", "))]
    UnknownJoint { name: String, suggestions: Vec<String> },
}

/// Errors from the library operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("invalid program: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error(transparent)]
    Registry(#[from] RegistryError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("buffer is empty")]
    EmptyBuffer,

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("timestep {t} outside horizon {horizon}")]
    TimestepOutOfRange { t: u32, horizon: u32 },

    #[error("merged program spans {span} timesteps, horizon is {horizon}")]
    HorizonExceeded { span: u32, horizon: u32 },

    #[error("tree too large for exhaustive search: {0}")]
    OracleBound(String),

    #[error("{0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Byte range in source text.
pub type Span = Range<usize>;
