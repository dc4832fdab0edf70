use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// A scalar value as stored by the engine.
///
/// Text is kept unescaped; quoting only happens when an expression is
/// rendered for display. Statements sent to the engine always bind values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SqlValue {
    Integer(i64),
    Real(f64),
    Text(String),
    Null,
}

impl SqlValue {
    pub fn is_null(&self) -> bool {
        matches!(self, SqlValue::Null)
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            SqlValue::Integer(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            SqlValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl From<i64> for SqlValue {
    fn from(v: i64) -> Self {
        SqlValue::Integer(v)
    }
}

impl From<f64> for SqlValue {
    fn from(v: f64) -> Self {
        SqlValue::Real(v)
    }
}

impl From<&str> for SqlValue {
    fn from(v: &str) -> Self {
        SqlValue::Text(v.to_string())
    }
}

impl From<String> for SqlValue {
    fn from(v: String) -> Self {
        SqlValue::Text(v)
    }
}

impl<T: Into<SqlValue>> From<Option<T>> for SqlValue {
    fn from(v: Option<T>) -> Self {
        v.map_or(SqlValue::Null, Into::into)
    }
}

impl fmt::Display for SqlValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::render::render_value(self))
    }
}

/// A column identifier. Matching is ASCII case-insensitive; the spelling
/// used by the author is preserved for rendering.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ident(String);

impl Ident {
    pub fn new(name: impl Into<String>) -> Self {
        Ident(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn matches(&self, other: &str) -> bool {
        self.0.eq_ignore_ascii_case(other)
    }
}

impl PartialEq for Ident {
    fn eq(&self, other: &Self) -> bool {
        self.0.eq_ignore_ascii_case(&other.0)
    }
}

impl Eq for Ident {}

impl Hash for Ident {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for b in self.0.bytes() {
            state.write_u8(b.to_ascii_lowercase());
        }
    }
}

impl Ord for Ident {
    fn cmp(&self, other: &Self) -> Ordering {
        let a = self.0.bytes().map(|b| b.to_ascii_lowercase());
        let b = other.0.bytes().map(|b| b.to_ascii_lowercase());
        a.cmp(b)
    }
}

impl PartialOrd for Ident {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Ident {
    fn from(s: &str) -> Self {
        Ident::new(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Eq => "=",
            BinaryOp::NotEq => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::LtEq => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::GtEq => ">=",
            BinaryOp::And => "AND",
            BinaryOp::Or => "OR",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq
            | BinaryOp::NotEq
            | BinaryOp::Lt
            | BinaryOp::LtEq
            | BinaryOp::Gt
            | BinaryOp::GtEq => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 4
    }
}

/// The closed set of aggregation functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub const ALL: [AggFunc; 5] = [
        AggFunc::Count,
        AggFunc::Sum,
        AggFunc::Avg,
        AggFunc::Min,
        AggFunc::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }

    pub fn from_name(name: &str) -> Option<AggFunc> {
        AggFunc::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for AggFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Expression tree for the supported SQL subset.
///
/// `Aggregate` nodes only occur in aggregate select lists and HAVING
/// clauses; the predicate parser rejects them.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Column(Ident),
    Literal(SqlValue),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    IsNull { expr: Box<Expr>, negated: bool },
    /// `arg == None` is `COUNT(*)`.
    Aggregate { func: AggFunc, arg: Option<Box<Expr>> },
}

impl Expr {
    pub fn column(name: impl Into<String>) -> Expr {
        Expr::Column(Ident::new(name))
    }

    pub fn literal(v: impl Into<SqlValue>) -> Expr {
        Expr::Literal(v.into())
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn and(self, other: Expr) -> Expr {
        Expr::binary(BinaryOp::And, self, other)
    }

    /// Conjunction of all given predicates, left-nested, or `None` when empty.
    pub fn conjoin(preds: impl IntoIterator<Item = Expr>) -> Option<Expr> {
        preds.into_iter().reduce(Expr::and)
    }

    /// Exactly the set of column names appearing anywhere in the tree.
    pub fn mentions(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Column(c) = e {
                out.insert(c.clone());
            }
        });
        out
    }

    /// Aggregation functions used anywhere in the tree.
    pub fn aggregate_functions(&self) -> BTreeSet<AggFunc> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Aggregate { func, .. } = e {
                out.insert(*func);
            }
        });
        out
    }

    pub fn contains_aggregate(&self) -> bool {
        !self.aggregate_functions().is_empty()
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Column(_) | Expr::Literal(_) => {}
            Expr::Unary(_, e) | Expr::IsNull { expr: e, .. } => e.visit(f),
            Expr::Binary(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
            Expr::Aggregate { arg, .. } => {
                if let Some(a) = arg {
                    a.visit(f);
                }
            }
        }
    }

    /// Literals in pre-order (the order in which they are bound).
    pub fn literals(&self) -> Vec<&SqlValue> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Literal(v) = e {
                out.push(v);
            }
        });
        out
    }

    /// Rebuild the tree replacing every column reference.
    pub fn map_columns<E>(
        &self,
        f: &mut impl FnMut(&Ident) -> Result<Expr, E>,
    ) -> Result<Expr, E> {
        Ok(match self {
            Expr::Column(c) => f(c)?,
            Expr::Literal(v) => Expr::Literal(v.clone()),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.map_columns(f)?)),
            Expr::Binary(op, l, r) => Expr::Binary(
                *op,
                Box::new(l.map_columns(f)?),
                Box::new(r.map_columns(f)?),
            ),
            Expr::IsNull { expr, negated } => Expr::IsNull {
                expr: Box::new(expr.map_columns(f)?),
                negated: *negated,
            },
            Expr::Aggregate { func, arg } => Expr::Aggregate {
                func: *func,
                arg: match arg {
                    Some(a) => Some(Box::new(a.map_columns(f)?)),
                    None => None,
                },
            },
        })
    }

    /// Structural equality ignoring literal payloads.
    pub fn same_shape(&self, other: &Expr) -> bool {
        match (self, other) {
            (Expr::Column(a), Expr::Column(b)) => a == b,
            (Expr::Literal(_), Expr::Literal(_)) => true,
            (Expr::Unary(o1, a), Expr::Unary(o2, b)) => o1 == o2 && a.same_shape(b),
            (Expr::Binary(o1, l1, r1), Expr::Binary(o2, l2, r2)) => {
                o1 == o2 && l1.same_shape(l2) && r1.same_shape(r2)
            }
            (
                Expr::IsNull { expr: a, negated: n1 },
                Expr::IsNull { expr: b, negated: n2 },
            ) => n1 == n2 && a.same_shape(b),
            (Expr::Aggregate { func: f1, arg: a1 }, Expr::Aggregate { func: f2, arg: a2 }) => {
                f1 == f2
                    && match (a1, a2) {
                        (None, None) => true,
                        (Some(a), Some(b)) => a.same_shape(b),
                        _ => false,
                    }
            }
            _ => false,
        }
    }
}

/// One item of a select list. Output names are derived, never chosen.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectItem {
    pub expr: Expr,
    pub output_name: Ident,
}

impl SelectItem {
    pub fn new(expr: Expr) -> SelectItem {
        let output_name = match &expr {
            Expr::Column(c) => c.clone(),
            other => Ident::new(
                super::render::render(other)
                    .chars()
                    .filter(|c| !c.is_whitespace())
                    .collect::<String>(),
            ),
        };
        SelectItem { expr, output_name }
    }

    pub fn is_simple(&self) -> bool {
        matches!(self.expr, Expr::Column(_))
    }
}

/// Items of an aggregate select list share the select-item representation;
/// their expressions may contain aggregation calls.
pub type AggItem = SelectItem;

/// `column = value` in an update's SET list.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub column: Ident,
    pub value: Expr,
}
