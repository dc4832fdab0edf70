//! View capabilities and the operations on them.
//!
//! A [`ViewValue`] is either a raw capability or a capability wrapped in one
//! or more contract layers. Every operation accepts either; on a guarded
//! value each layer is consulted, outermost first, before the raw
//! capability is reached.
//!
//! Derivations (`filter`, `select`, `join`, `aggregate`) only build trees.
//! The engine is contacted by `fetch`, `update`, `delete` and `insert`.

use std::sync::Arc;

use crate::backend::{Connection, RowSet};
use crate::contract::{self, GuardedView};
use crate::error::{Error, Result};
use crate::query::{
    chain, derive_updatability, require_visible_predicates, QueryAst, Updatability, Validation,
    ViewSchema,
};
use crate::sql::{
    parse_aggregate_list, parse_assignments, parse_column_list, parse_having, parse_select_list,
    validate, Assignment, Expr, Ident, IntoPredicate, SelectItem, SqlValue,
};

/// Unrestricted access to one view of a database.
///
/// There is no public constructor: capabilities are minted by
/// [`RootAuthority`](crate::authority::RootAuthority) or derived from other
/// capabilities. There is also no way to serialize one.
#[derive(Clone)]
pub struct ViewCapability {
    ast: Arc<QueryAst>,
    conn: Connection,
    updatability: Arc<Updatability>,
}

impl std::fmt::Debug for ViewCapability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ViewCapability")
            .field("columns", &self.ast.schema().names())
            .finish_non_exhaustive()
    }
}

impl ViewCapability {
    pub(crate) fn new(ast: QueryAst, conn: Connection) -> ViewCapability {
        let updatability = Arc::new(derive_updatability(&ast));
        ViewCapability {
            ast: Arc::new(ast),
            conn,
            updatability,
        }
    }

    pub fn ast(&self) -> &QueryAst {
        &self.ast
    }

    pub fn schema(&self) -> &ViewSchema {
        self.ast.schema()
    }

    pub fn updatability(&self) -> &Updatability {
        &self.updatability
    }

    fn mode(&self) -> Validation {
        self.conn.validation()
    }

    fn derive(&self, ast: QueryAst) -> ViewCapability {
        ViewCapability::new(ast, self.conn.clone())
    }

    pub(crate) fn filter(&self, pred: Expr) -> Result<ViewCapability> {
        let ast = QueryAst::filter(self.ast.clone(), pred, self.mode())?;
        Ok(self.derive(ast))
    }

    pub(crate) fn select(&self, items: Vec<SelectItem>) -> Result<ViewCapability> {
        let ast = QueryAst::project(self.ast.clone(), items, self.mode())?;
        Ok(self.derive(ast))
    }

    pub(crate) fn join(&self, other: &ViewCapability, pred: Option<Expr>) -> Result<ViewCapability> {
        if !self.conn.same_connection(&other.conn) {
            return Err(Error::CrossDatabaseJoin);
        }
        let ast = QueryAst::join(self.ast.clone(), other.ast.clone(), pred, self.mode())?;
        Ok(self.derive(ast))
    }

    pub(crate) fn aggregate(&self, spec: AggregateSpec) -> Result<ViewCapability> {
        let ast = QueryAst::aggregate(
            self.ast.clone(),
            spec.items,
            spec.group_by,
            spec.having,
            self.mode(),
        )?;
        Ok(self.derive(ast))
    }

    pub(crate) fn fetch(&self) -> Result<RowSet> {
        let q = crate::query::concretize(&self.ast);
        let mut rows = self.conn.query(&q.sql, &q.params)?;
        rows.columns = self.ast.schema().names();
        Ok(rows)
    }

    fn check_expr(&self, e: &Expr) -> Result<()> {
        if self.mode() == Validation::On {
            validate(e, self.schema())?;
        }
        Ok(())
    }

    pub(crate) fn update(&self, set: &[Assignment], scope: Option<&Expr>) -> Result<usize> {
        let Some(chain) = chain(&self.ast) else {
            let first = set.first().map(|a| a.column.clone());
            return Err(Error::NotUpdatable(first.unwrap_or_else(|| Ident::new("*"))));
        };
        require_visible_predicates(&self.ast)?;
        let mut base_set = Vec::with_capacity(set.len());
        for a in set {
            if !self.updatability.updatable_columns.contains(&a.column) {
                return Err(if self.schema().column(&a.column).is_some() {
                    Error::NotUpdatable(a.column.clone())
                } else {
                    Error::UnknownColumn(a.column.clone())
                });
            }
            self.check_expr(&a.value)?;
            let target = match chain.expr_for(&a.column) {
                Some(Expr::Column(c)) => c.clone(),
                _ => return Err(Error::NotUpdatable(a.column.clone())),
            };
            base_set.push(Assignment {
                column: target,
                value: chain.to_base(&a.value),
            });
        }
        if let Some(w) = scope {
            self.check_expr(w)?;
        }
        let scope = Expr::conjoin(
            chain
                .predicates
                .iter()
                .cloned()
                .chain(scope.map(|w| chain.to_base(w))),
        );
        let check = chain.check();
        let out = self
            .conn
            .guarded_update(&chain.table, &base_set, scope.as_ref(), check.as_ref())?;
        Ok(out.affected_rows)
    }

    pub(crate) fn delete(&self, scope: Option<&Expr>) -> Result<usize> {
        if !self.updatability.deletable {
            return Err(Error::NotDeletable);
        }
        let chain = chain(&self.ast).ok_or(Error::NotDeletable)?;
        require_visible_predicates(&self.ast)?;
        if let Some(w) = scope {
            self.check_expr(w)?;
        }
        let scope = Expr::conjoin(
            chain
                .predicates
                .iter()
                .cloned()
                .chain(scope.map(|w| chain.to_base(w))),
        );
        Ok(self.conn.delete(&chain.table, scope.as_ref())?.affected_rows)
    }

    pub(crate) fn insert(&self, columns: &[Ident], rows: &[Vec<SqlValue>]) -> Result<usize> {
        if !self.updatability.insertable {
            return Err(Error::NotInsertable);
        }
        let chain = chain(&self.ast).ok_or(Error::NotInsertable)?;
        let mut targets = Vec::with_capacity(columns.len());
        for c in columns {
            self.schema().resolve(c)?;
            if !self.updatability.updatable_columns.contains(c) {
                return Err(Error::NotUpdatable(c.clone()));
            }
            match chain.expr_for(c) {
                Some(Expr::Column(base)) => targets.push(base.clone()),
                _ => return Err(Error::NotUpdatable(c.clone())),
            }
        }
        let check = chain.check();
        let out = self
            .conn
            .guarded_insert(&chain.table, &targets, rows, check.as_ref())?;
        Ok(out.affected_rows)
    }
}

/// Arguments of an aggregation.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateSpec {
    pub items: Vec<SelectItem>,
    pub group_by: Vec<Ident>,
    pub having: Option<Expr>,
}

impl AggregateSpec {
    /// Parse an aggregate list such as `"book, COUNT(*)"`.
    pub fn parse(items: &str) -> Result<AggregateSpec> {
        Ok(AggregateSpec {
            items: parse_aggregate_list(items)?,
            group_by: Vec::new(),
            having: None,
        })
    }

    pub fn group_by(mut self, columns: &str) -> Result<AggregateSpec> {
        self.group_by = parse_column_list(columns)?;
        Ok(self)
    }

    pub fn having(mut self, clause: &str) -> Result<AggregateSpec> {
        self.having = Some(parse_having(clause)?);
        Ok(self)
    }

    pub(crate) fn functions(&self) -> std::collections::BTreeSet<crate::sql::AggFunc> {
        let mut out: std::collections::BTreeSet<_> = self
            .items
            .iter()
            .flat_map(|i| i.expr.aggregate_functions())
            .collect();
        if let Some(h) = &self.having {
            out.extend(h.aggregate_functions());
        }
        out
    }
}

/// A raw or contracted view capability.
#[derive(Clone, Debug)]
pub enum ViewValue {
    Raw(ViewCapability),
    Guarded(Arc<GuardedView>),
}

impl From<ViewCapability> for ViewValue {
    fn from(c: ViewCapability) -> Self {
        ViewValue::Raw(c)
    }
}

/// Projection items: source text or pre-built items.
pub trait IntoSelectItems {
    fn into_select_items(self) -> Result<Vec<SelectItem>>;
}

impl IntoSelectItems for &str {
    fn into_select_items(self) -> Result<Vec<SelectItem>> {
        parse_select_list(self)
    }
}

impl IntoSelectItems for Vec<SelectItem> {
    fn into_select_items(self) -> Result<Vec<SelectItem>> {
        Ok(self)
    }
}

/// SET lists: source text or pre-built assignments.
pub trait IntoAssignments {
    fn into_assignments(self) -> Result<Vec<Assignment>>;
}

impl IntoAssignments for &str {
    fn into_assignments(self) -> Result<Vec<Assignment>> {
        parse_assignments(self)
    }
}

impl IntoAssignments for Vec<Assignment> {
    fn into_assignments(self) -> Result<Vec<Assignment>> {
        Ok(self)
    }
}

impl ViewValue {
    /// The output columns. Contracts never change a view's schema.
    pub fn schema(&self) -> &ViewSchema {
        self.raw().schema()
    }

    /// The relational tree the view denotes.
    pub fn ast(&self) -> &QueryAst {
        self.raw().ast()
    }

    /// The raw capability under all contract layers.
    pub(crate) fn raw(&self) -> &ViewCapability {
        let mut cur = self;
        loop {
            match cur {
                ViewValue::Raw(c) => return c,
                ViewValue::Guarded(g) => cur = g.inner(),
            }
        }
    }

    pub fn is_guarded(&self) -> bool {
        matches!(self, ViewValue::Guarded(_))
    }

    /// Number of contract layers wrapped around the raw capability.
    pub fn layer_count(&self) -> usize {
        let mut n = 0;
        let mut cur = self;
        while let ViewValue::Guarded(g) = cur {
            n += 1;
            cur = g.inner();
        }
        n
    }

    /// Keep the rows satisfying `clause`.
    pub fn filter(&self, clause: impl IntoPredicate) -> Result<ViewValue> {
        self.filter_expr(clause.into_predicate()?)
    }

    pub(crate) fn filter_expr(&self, pred: Expr) -> Result<ViewValue> {
        match self {
            ViewValue::Raw(c) => c.filter(pred).map(ViewValue::Raw),
            ViewValue::Guarded(g) => g.filter(pred),
        }
    }

    /// Project to the given expressions. Columns cannot be renamed.
    pub fn select(&self, items: impl IntoSelectItems) -> Result<ViewValue> {
        self.select_items(items.into_select_items()?)
    }

    pub(crate) fn select_items(&self, items: Vec<SelectItem>) -> Result<ViewValue> {
        match self {
            ViewValue::Raw(c) => c.select(items).map(ViewValue::Raw),
            ViewValue::Guarded(g) => g.select(items),
        }
    }

    /// Inner join with `other`, optionally on `clause`.
    pub fn join(&self, other: &ViewValue, clause: Option<&str>) -> Result<ViewValue> {
        let pred = clause.map(IntoPredicate::into_predicate).transpose()?;
        contract::join(self, other, pred)
    }

    pub fn join_on(&self, other: &ViewValue, pred: Option<Expr>) -> Result<ViewValue> {
        contract::join(self, other, pred)
    }

    /// Aggregate with the given list; see [`AggregateSpec`] for grouping.
    pub fn aggregate(&self, items: &str) -> Result<ViewValue> {
        self.aggregate_with(AggregateSpec::parse(items)?)
    }

    pub fn aggregate_with(&self, spec: AggregateSpec) -> Result<ViewValue> {
        match self {
            ViewValue::Raw(c) => c.aggregate(spec).map(ViewValue::Raw),
            ViewValue::Guarded(_) => contract::aggregate(self, spec),
        }
    }

    /// Run the view's query and return its rows.
    pub fn fetch(&self) -> Result<RowSet> {
        match self {
            ViewValue::Raw(c) => c.fetch(),
            ViewValue::Guarded(_) => {
                contract::through_layers(self, contract::Privilege::Fetch, |v| v.fetch())
            }
        }
    }

    /// Update rows of the view. `scope` narrows which rows are touched but,
    /// unlike the view's own predicates, is not enforced on the new values.
    pub fn update(&self, set: impl IntoAssignments, scope: Option<&str>) -> Result<usize> {
        let set = set.into_assignments()?;
        let scope = scope.map(IntoPredicate::into_predicate).transpose()?;
        self.update_expr(&set, scope.as_ref())
    }

    pub fn update_expr(&self, set: &[Assignment], scope: Option<&Expr>) -> Result<usize> {
        match self {
            ViewValue::Raw(c) => c.update(set, scope),
            ViewValue::Guarded(_) => contract::through_layers(self, contract::Privilege::Update, |v| {
                v.update_expr(set, scope)
            }),
        }
    }

    /// Delete the view's rows, optionally only those matching `scope`.
    pub fn delete(&self, scope: Option<&str>) -> Result<usize> {
        let scope = scope.map(IntoPredicate::into_predicate).transpose()?;
        self.delete_expr(scope.as_ref())
    }

    pub fn delete_expr(&self, scope: Option<&Expr>) -> Result<usize> {
        match self {
            ViewValue::Raw(c) => c.delete(scope),
            ViewValue::Guarded(_) => contract::through_layers(self, contract::Privilege::Delete, |v| {
                v.delete_expr(scope)
            }),
        }
    }

    /// Insert rows; each must satisfy the view's predicates.
    pub fn insert<S: AsRef<str>>(&self, columns: &[S], rows: Vec<Vec<SqlValue>>) -> Result<usize> {
        let columns: Vec<Ident> = columns.iter().map(|c| Ident::new(c.as_ref())).collect();
        self.insert_rows(&columns, &rows)
    }

    pub fn insert_rows(&self, columns: &[Ident], rows: &[Vec<SqlValue>]) -> Result<usize> {
        match self {
            ViewValue::Raw(c) => c.insert(columns, rows),
            ViewValue::Guarded(_) => contract::through_layers(self, contract::Privilege::Insert, |v| {
                v.insert_rows(columns, rows)
            }),
        }
    }
}
