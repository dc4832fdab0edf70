use std::fmt;

use thiserror::Error;

use crate::contract::ContractViolation;
use crate::sql::{Ident, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// The data-modifying operations, used to label check-option failures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmlKind {
    Insert,
    Update,
    Delete,
}

impl fmt::Display for DmlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DmlKind::Insert => "insert",
            DmlKind::Update => "update",
            DmlKind::Delete => "delete",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("column renaming is not supported: `{0}`")]
    AliasNotSupported(String),
    #[error("column `{0}` is assigned more than once")]
    DuplicateAssignment(Ident),
    #[error("unknown column `{0}`")]
    UnknownColumn(Ident),
    #[error("ambiguous column `{0}`")]
    AmbiguousColumn(Ident),
    #[error("arity mismatch: expected {expected}, got {actual}")]
    ArityMismatch { expected: usize, actual: usize },
    #[error("column `{0}` is not updatable through this view")]
    NotUpdatable(Ident),
    #[error("view is not insertable")]
    NotInsertable,
    #[error("view is not deletable")]
    NotDeletable,
    #[error("{op}: violated view constraint: {clause}")]
    ViewConstraintViolation { op: DmlKind, clause: String },
    #[error(transparent)]
    Contract(#[from] ContractViolation),
    #[error("views over different connections cannot be joined")]
    CrossDatabaseJoin,
    #[error("malformed contract: {0}")]
    MalformedContract(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown database `{0}`")]
    UnknownDatabase(String),
    #[error("no user context is established")]
    NoUserContext,
    #[error("cannot open database: {0}")]
    Io(String),
    #[error("file is not a database: {0}")]
    NotADatabase(String),
    #[error("engine error: {source}; statement: {statement}")]
    Engine {
        statement: String,
        #[source]
        source: rusqlite::Error,
    },
}

impl Error {
    pub(crate) fn engine(statement: impl Into<String>, source: rusqlite::Error) -> Error {
        Error::Engine {
            statement: statement.into(),
            source,
        }
    }

    /// The contract violation carried by this error, if any.
    pub fn as_contract_violation(&self) -> Option<&ContractViolation> {
        match self {
            Error::Contract(v) => Some(v),
            _ => None,
        }
    }

    /// True for the validation family: parse, alias, assignment and
    /// column-resolution failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::AliasNotSupported(_)
                | Error::DuplicateAssignment(_)
                | Error::UnknownColumn(_)
                | Error::AmbiguousColumn(_)
                | Error::ArityMismatch { .. }
                | Error::NotUpdatable(_)
                | Error::NotInsertable
                | Error::NotDeletable
        )
    }
}
