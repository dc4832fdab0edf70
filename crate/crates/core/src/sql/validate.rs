use std::collections::BTreeMap;

use super::ast::{Expr, Ident};
use crate::error::{Error, Result};
use crate::query::ViewSchema;

/// An expression whose column references all resolve to exactly one column
/// of the schema it was checked against.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedExpr {
    pub expr: Expr,
    /// Column name to its position in the schema.
    pub bindings: BTreeMap<Ident, usize>,
}

/// Resolve every column reference in `expr` against `schema`.
///
/// Reports the first failing reference in pre-order.
pub fn validate(expr: &Expr, schema: &ViewSchema) -> Result<ValidatedExpr> {
    let mut bindings = BTreeMap::new();
    let mut failure = None;
    expr.visit(&mut |e| {
        if failure.is_some() {
            return;
        }
        if let Expr::Column(c) = e {
            match schema.resolve(c) {
                Ok(i) => {
                    bindings.insert(c.clone(), i);
                }
                Err(err) => failure = Some(err),
            }
        }
    });
    match failure {
        Some(err) => Err(err),
        None => Ok(ValidatedExpr {
            expr: expr.clone(),
            bindings,
        }),
    }
}

/// Columns of `expr` that are not visible in `schema`, if any.
pub(crate) fn first_unresolved(expr: &Expr, schema: &ViewSchema) -> Option<Error> {
    validate(expr, schema).err()
}
