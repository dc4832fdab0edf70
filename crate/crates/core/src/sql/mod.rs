//! The SQL expression subset: parsing, rendering, validation and
//! injection-safe formatting.

mod ast;
mod lexer;
mod parser;
mod render;
mod validate;

use std::fmt;

pub use ast::{AggFunc, AggItem, Assignment, BinaryOp, Expr, Ident, SelectItem, SqlValue, UnaryOp};
pub use parser::{
    parse_aggregate_list, parse_assignments, parse_column_list, parse_having, parse_predicate,
    parse_select_list, sqlformat,
};
pub use render::{quote_ident, quote_string, render, render_ident, render_value};
pub(crate) use render::{write_expr, BindSink, SqlSink};
pub use validate::{validate, ValidatedExpr};
pub(crate) use validate::first_unresolved;

/// Exactly the column names appearing in `expr`.
pub fn mentions(expr: &Expr) -> std::collections::BTreeSet<Ident> {
    expr.mentions()
}

/// Malformed input, with the byte offset where parsing stopped and the
/// tokens that would have been accepted there.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(
        offset: usize,
        expected: Vec<String>,
        found: impl Into<String>,
        message: impl Into<String>,
    ) -> ParseError {
        ParseError {
            offset,
            expected,
            found: found.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}", self.offset)?;
        if !self.message.is_empty() {
            write!(f, ": {}", self.message)?;
        }
        write!(f, " (found {}", self.found)?;
        if !self.expected.is_empty() {
            write!(f, ", expected {}", self.expected.join(" or "))?;
        }
        f.write_str(")")
    }
}

impl std::error::Error for ParseError {}

/// Anything that can stand in for a predicate argument: source text to be
/// parsed, or an already-built expression (e.g. from [`sqlformat`]).
pub trait IntoPredicate {
    fn into_predicate(self) -> crate::Result<Expr>;
}

impl IntoPredicate for &str {
    fn into_predicate(self) -> crate::Result<Expr> {
        parse_predicate(self)
    }
}

impl IntoPredicate for &String {
    fn into_predicate(self) -> crate::Result<Expr> {
        parse_predicate(self)
    }
}

impl IntoPredicate for String {
    fn into_predicate(self) -> crate::Result<Expr> {
        parse_predicate(&self)
    }
}

impl IntoPredicate for Expr {
    fn into_predicate(self) -> crate::Result<Expr> {
        Ok(self)
    }
}

impl IntoPredicate for &Expr {
    fn into_predicate(self) -> crate::Result<Expr> {
        Ok(self.clone())
    }
}
