use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("undeclared proposition `{0}`")]
    UndeclaredProp(String),
    #[error("floats from different systems ({0} vs {1})")]
    MixedSystems(String, String),
    #[error("label alphabets differ: {0:?} vs {1:?}")]
    PiMismatch(Vec<String>, Vec<String>),
    #[error("{what}: size {count} exceeds guard {limit}")]
    Guard {
        what: &'static str,
        count: String,
        limit: String,
    },
    #[error("run did not cycle within {0} rounds")]
    Ceiling(usize),
}

impl Error {
    pub(crate) fn guard(what: &'static str, count: impl ToString, limit: impl ToString) -> Self {
        Error::Guard {
            what,
            count: count.to_string(),
            limit: limit.to_string(),
        }
    }

    /// Guards and ceilings are resource limits; everything else is bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Guard { .. } | Error::Ceiling(_))
    }
}
