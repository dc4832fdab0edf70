//! Relational trees denoted by view capabilities.
//!
//! Nodes are immutable and cheap to share. Building a tree never touches the
//! engine; [`concretize`] turns a tree into one SELECT statement when an
//! operation needs data.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sql::{
    first_unresolved, quote_ident, validate, write_expr, BindSink, Expr, Ident, ParseError,
    SelectItem, SqlValue,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Base { table: Ident, column: Ident },
    Derived,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnInfo {
    pub name: Ident,
    pub declared_type: String,
    pub nullable: bool,
    /// The engine supplies a value when an insert omits the column.
    pub has_default: bool,
    pub is_simple: bool,
    pub origin: Origin,
    /// Foreign-key target `(table, column)` when declared on the base table.
    pub references: Option<(Ident, Ident)>,
}

impl ColumnInfo {
    pub fn base(table: &str, name: &str, declared_type: &str, nullable: bool) -> ColumnInfo {
        ColumnInfo {
            name: Ident::new(name),
            declared_type: declared_type.to_string(),
            nullable,
            has_default: false,
            is_simple: true,
            origin: Origin::Base {
                table: Ident::new(table),
                column: Ident::new(name),
            },
            references: None,
        }
    }

    fn derived(name: Ident) -> ColumnInfo {
        ColumnInfo {
            name,
            declared_type: String::new(),
            nullable: true,
            has_default: false,
            is_simple: false,
            origin: Origin::Derived,
            references: None,
        }
    }

    /// Whether an insert may leave this column out.
    pub fn omittable(&self) -> bool {
        self.nullable || self.has_default
    }
}

/// Ordered output columns of a view. Names may repeat after a join; using
/// a repeated name in an expression is reported by validation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ViewSchema {
    pub columns: Vec<ColumnInfo>,
}

impl ViewSchema {
    pub fn new(columns: Vec<ColumnInfo>) -> ViewSchema {
        ViewSchema { columns }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.to_string()).collect()
    }

    /// Position of the single column called `name`.
    pub fn resolve(&self, name: &Ident) -> Result<usize> {
        let mut hits = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.name == *name)
            .map(|(i, _)| i);
        match (hits.next(), hits.next()) {
            (Some(i), None) => Ok(i),
            (None, _) => Err(Error::UnknownColumn(name.clone())),
            (Some(_), Some(_)) => Err(Error::AmbiguousColumn(name.clone())),
        }
    }

    pub fn column(&self, name: &Ident) -> Option<&ColumnInfo> {
        self.resolve(name).ok().map(|i| &self.columns[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Base {
        table: Ident,
    },
    Where {
        child: Arc<QueryAst>,
        pred: Expr,
    },
    Project {
        child: Arc<QueryAst>,
        items: Vec<SelectItem>,
    },
    Join {
        left: Arc<QueryAst>,
        right: Arc<QueryAst>,
        pred: Option<Expr>,
    },
    Aggregate {
        child: Arc<QueryAst>,
        items: Vec<SelectItem>,
        group_by: Vec<Ident>,
        having: Option<Expr>,
    },
}

/// A view definition with its derived schema.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryAst {
    node: Node,
    schema: Arc<ViewSchema>,
}

/// Whether column references are resolved when a node is built. Turning it
/// off leaves error detection to the engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Validation {
    On,
    Off,
}

fn reject_aggregates(expr: &Expr, context: &str) -> Result<()> {
    if let Some(f) = expr.aggregate_functions().into_iter().next() {
        return Err(ParseError::new(
            0,
            vec!["expression".into()],
            f.name(),
            format!("aggregate function not allowed in {context}"),
        )
        .into());
    }
    Ok(())
}

impl QueryAst {
    pub fn base(table: impl Into<Ident>, schema: ViewSchema) -> QueryAst {
        QueryAst {
            node: Node::Base {
                table: table.into(),
            },
            schema: Arc::new(schema),
        }
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn schema(&self) -> &Arc<ViewSchema> {
        &self.schema
    }

    pub fn filter(child: Arc<QueryAst>, pred: Expr, mode: Validation) -> Result<QueryAst> {
        reject_aggregates(&pred, "a WHERE clause")?;
        if mode == Validation::On {
            validate(&pred, &child.schema)?;
        }
        let schema = child.schema.clone();
        Ok(QueryAst {
            node: Node::Where { child, pred },
            schema,
        })
    }

    pub fn project(child: Arc<QueryAst>, items: Vec<SelectItem>, mode: Validation) -> Result<QueryAst> {
        if items.is_empty() {
            return Err(ParseError::new(0, vec!["expression".into()], "end of input", "empty select list").into());
        }
        for item in &items {
            reject_aggregates(&item.expr, "a select list; use aggregate")?;
            if mode == Validation::On {
                validate(&item.expr, &child.schema)?;
            }
        }
        let schema = ViewSchema::new(
            items
                .iter()
                .map(|item| item_column(item, &child.schema))
                .collect(),
        );
        Ok(QueryAst {
            node: Node::Project { child, items },
            schema: Arc::new(schema),
        })
    }

    pub fn join(
        left: Arc<QueryAst>,
        right: Arc<QueryAst>,
        pred: Option<Expr>,
        mode: Validation,
    ) -> Result<QueryAst> {
        let mut columns = left.schema.columns.clone();
        columns.extend(right.schema.columns.iter().cloned());
        let schema = ViewSchema::new(columns);
        if let Some(p) = &pred {
            reject_aggregates(p, "a join condition")?;
            if mode == Validation::On {
                validate(p, &schema)?;
            }
        }
        Ok(QueryAst {
            node: Node::Join { left, right, pred },
            schema: Arc::new(schema),
        })
    }

    pub fn aggregate(
        child: Arc<QueryAst>,
        items: Vec<SelectItem>,
        group_by: Vec<Ident>,
        having: Option<Expr>,
        mode: Validation,
    ) -> Result<QueryAst> {
        if items.is_empty() {
            return Err(ParseError::new(0, vec!["expression".into()], "end of input", "empty aggregate list").into());
        }
        if mode == Validation::On {
            for item in &items {
                validate(&item.expr, &child.schema)?;
            }
            for g in &group_by {
                child.schema.resolve(g)?;
            }
            if let Some(h) = &having {
                validate(h, &child.schema)?;
            }
        }
        let schema = ViewSchema::new(
            items
                .iter()
                .map(|item| item_column(item, &child.schema))
                .collect(),
        );
        Ok(QueryAst {
            node: Node::Aggregate {
                child,
                items,
                group_by,
                having,
            },
            schema: Arc::new(schema),
        })
    }

    /// Name of the base table at the root of a Where/Project chain.
    pub fn base_table(&self) -> Option<&Ident> {
        match &self.node {
            Node::Base { table } => Some(table),
            Node::Where { child, .. } | Node::Project { child, .. } => child.base_table(),
            Node::Join { .. } | Node::Aggregate { .. } => None,
        }
    }

    /// Every WHERE predicate on the Where/Project path down to the base, as
    /// written, outermost first.
    pub fn definition_predicates(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match &cur.node {
                Node::Where { child, pred } => {
                    out.push(pred);
                    cur = child;
                }
                Node::Project { child, .. } => cur = child,
                _ => return out,
            }
        }
    }

    pub fn depth(&self) -> usize {
        match &self.node {
            Node::Base { .. } => 1,
            Node::Where { child, .. } | Node::Project { child, .. } | Node::Aggregate { child, .. } => {
                1 + child.depth()
            }
            Node::Join { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

fn item_column(item: &SelectItem, child: &ViewSchema) -> ColumnInfo {
    match &item.expr {
        crate::sql::Expr::Column(c) => match child.column(c) {
            Some(info) => info.clone(),
            None => ColumnInfo {
                is_simple: true,
                ..ColumnInfo::derived(item.output_name.clone())
            },
        },
        _ => ColumnInfo::derived(item.output_name.clone()),
    }
}

/// The schema of the view a tree denotes.
pub fn derive_schema(ast: &QueryAst) -> ViewSchema {
    (*ast.schema).clone()
}

/// What writes a view admits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Updatability {
    pub insertable: bool,
    pub deletable: bool,
    pub updatable_columns: BTreeSet<Ident>,
}

impl Updatability {
    pub fn none() -> Updatability {
        Updatability {
            insertable: false,
            deletable: false,
            updatable_columns: BTreeSet::new(),
        }
    }
}

/// Conservative updatability: joins and aggregates admit nothing, and
/// non-simple columns are never updatable.
pub fn derive_updatability(ast: &QueryAst) -> Updatability {
    match &ast.node {
        Node::Base { .. } => Updatability {
            insertable: true,
            deletable: true,
            updatable_columns: ast.schema.columns.iter().map(|c| c.name.clone()).collect(),
        },
        Node::Where { child, .. } => derive_updatability(child),
        Node::Project { child, items } => {
            let inner = derive_updatability(child);
            let updatable_columns = items
                .iter()
                .filter_map(|item| match &item.expr {
                    crate::sql::Expr::Column(c) if inner.updatable_columns.contains(c) => {
                        Some(c.clone())
                    }
                    _ => None,
                })
                .collect();
            let insertable = inner.insertable
                && match base_schema(ast) {
                    Some(base) => {
                        let covered: BTreeSet<Ident> = ast
                            .schema
                            .columns
                            .iter()
                            .filter(|c| c.is_simple)
                            .filter_map(|c| match &c.origin {
                                Origin::Base { column, .. } => Some(column.clone()),
                                Origin::Derived => None,
                            })
                            .collect();
                        base.columns
                            .iter()
                            .all(|c| covered.contains(&c.name) || c.omittable())
                    }
                    None => false,
                };
            Updatability {
                insertable,
                deletable: inner.deletable,
                updatable_columns,
            }
        }
        Node::Join { .. } | Node::Aggregate { .. } => Updatability::none(),
    }
}

fn base_schema(ast: &QueryAst) -> Option<&Arc<ViewSchema>> {
    match &ast.node {
        Node::Base { .. } => Some(&ast.schema),
        Node::Where { child, .. } | Node::Project { child, .. } => base_schema(child),
        _ => None,
    }
}

/// A Where/Project chain rewritten in terms of its base table.
#[derive(Clone, Debug)]
pub(crate) struct Chain {
    pub table: Ident,
    /// Output columns of the view, each as an expression over base columns.
    pub columns: Vec<(Ident, Expr)>,
    /// Definition predicates over base columns, innermost first.
    pub predicates: Vec<Expr>,
}

impl Chain {
    pub fn expr_for(&self, name: &Ident) -> Option<&Expr> {
        let mut hits = self.columns.iter().filter(|(n, _)| n == name);
        match (hits.next(), hits.next()) {
            (Some((_, e)), None) => Some(e),
            _ => None,
        }
    }

    /// Rewrite an expression over the view's columns into base terms.
    /// Unresolvable names are left alone for the engine to report.
    pub fn to_base(&self, expr: &Expr) -> Expr {
        expr.map_columns::<std::convert::Infallible>(&mut |c| {
            Ok(self.expr_for(c).cloned().unwrap_or_else(|| Expr::Column(c.clone())))
        })
        .unwrap_or_else(|e| match e {})
    }

    pub fn check(&self) -> Option<Expr> {
        Expr::conjoin(self.predicates.iter().cloned())
    }
}

pub(crate) fn chain(ast: &QueryAst) -> Option<Chain> {
    match &ast.node {
        Node::Base { table } => Some(Chain {
            table: table.clone(),
            columns: ast
                .schema
                .columns
                .iter()
                .map(|c| (c.name.clone(), Expr::Column(c.name.clone())))
                .collect(),
            predicates: Vec::new(),
        }),
        Node::Where { child, pred } => {
            let mut c = chain(child)?;
            let p = c.to_base(pred);
            c.predicates.push(p);
            Some(c)
        }
        Node::Project { child, items } => {
            let mut c = chain(child)?;
            let columns = items
                .iter()
                .map(|item| (item.output_name.clone(), c.to_base(&item.expr)))
                .collect();
            c.columns = columns;
            Some(c)
        }
        Node::Join { .. } | Node::Aggregate { .. } => None,
    }
}

/// Conjunction of the WHERE predicates between the node and its base table,
/// expressed over base columns; `None` when there are none or the tree is
/// not a Where/Project chain.
pub fn check_clause(ast: &QueryAst) -> Option<Expr> {
    chain(ast).and_then(|c| c.check())
}

/// Fails when a definition predicate mentions a column the view no longer
/// exposes.
pub(crate) fn require_visible_predicates(ast: &QueryAst) -> Result<()> {
    for pred in ast.definition_predicates() {
        if let Some(err) = first_unresolved(pred, &ast.schema) {
            return Err(err);
        }
    }
    Ok(())
}

/// One SELECT statement plus the values bound to its `?N` parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteQuery {
    pub sql: String,
    pub params: Vec<SqlValue>,
}

impl fmt::Display for ConcreteQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.sql)
    }
}

struct Select {
    /// `None` is `*`.
    columns: Option<Vec<String>>,
    from: String,
    filters: Vec<String>,
    group_by: Vec<String>,
    having: Option<String>,
    /// The names in scope are exactly the output columns, so filters and
    /// projections can merge into this block.
    plain: bool,
}

impl Select {
    fn sql(&self) -> String {
        let mut s = String::from("SELECT ");
        match &self.columns {
            Some(cols) => s.push_str(&cols.join(", ")),
            None => s.push('*'),
        }
        s.push_str(" FROM ");
        s.push_str(&self.from);
        if !self.filters.is_empty() {
            s.push_str(" WHERE ");
            s.push_str(&self.filters.join(" AND "));
        }
        if !self.group_by.is_empty() {
            s.push_str(" GROUP BY ");
            s.push_str(&self.group_by.join(", "));
        }
        if let Some(h) = &self.having {
            s.push_str(" HAVING ");
            s.push_str(h);
        }
        s
    }

    fn wrapped(self) -> Select {
        Select {
            columns: None,
            from: format!("({})", self.sql()),
            filters: Vec::new(),
            group_by: Vec::new(),
            having: None,
            plain: true,
        }
    }

    fn into_source(self) -> String {
        format!("({})", self.sql())
    }
}

fn bound(expr: &Expr, params: &mut Vec<SqlValue>) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out, &mut BindSink { params });
    out
}

fn select_item(item: &SelectItem, params: &mut Vec<SqlValue>) -> String {
    let e = bound(&item.expr, params);
    if item.is_simple() {
        e
    } else {
        format!("{e} AS {}", quote_ident(item.output_name.as_str()))
    }
}

fn compile(ast: &QueryAst, params: &mut Vec<SqlValue>) -> Select {
    match &ast.node {
        Node::Base { table } => Select {
            columns: Some(
                ast.schema
                    .columns
                    .iter()
                    .map(|c| quote_ident(c.name.as_str()))
                    .collect(),
            ),
            from: quote_ident(table.as_str()),
            filters: Vec::new(),
            group_by: Vec::new(),
            having: None,
            plain: true,
        },
        Node::Where { child, pred } => {
            let inner = compile(child, params);
            let mut sel = if inner.plain { inner } else { inner.wrapped() };
            let p = bound(pred, params);
            sel.filters.push(p);
            sel
        }
        Node::Project { child, items } => {
            let inner = compile(child, params);
            let mut sel = if inner.plain { inner } else { inner.wrapped() };
            sel.columns = Some(items.iter().map(|i| select_item(i, params)).collect());
            sel.plain = false;
            sel
        }
        Node::Join { left, right, pred } => {
            let l = compile(left, params).into_source();
            let r = compile(right, params).into_source();
            let from = match pred {
                Some(p) => format!("{l} INNER JOIN {r} ON {}", bound(p, params)),
                None => format!("{l} CROSS JOIN {r}"),
            };
            Select {
                columns: None,
                from,
                filters: Vec::new(),
                group_by: Vec::new(),
                having: None,
                plain: true,
            }
        }
        Node::Aggregate {
            child,
            items,
            group_by,
            having,
        } => {
            let inner = compile(child, params);
            let mut sel = if inner.plain { inner } else { inner.wrapped() };
            sel.plain = false;
            sel.group_by = group_by.iter().map(|g| quote_ident(g.as_str())).collect();
            match having {
                Some(h) if group_by.is_empty() => {
                    // Older engines reject HAVING without GROUP BY: compute
                    // the condition as a column and filter one level up.
                    let mut cols: Vec<String> = items
                        .iter()
                        .enumerate()
                        .map(|(i, item)| format!("{} AS \"capql_col{i}\"", bound(&item.expr, params)))
                        .collect();
                    cols.push(format!("{} AS \"capql_having\"", bound(h, params)));
                    sel.columns = Some(cols);
                    let mut outer = sel.wrapped();
                    outer.columns = Some(
                        items
                            .iter()
                            .enumerate()
                            .map(|(i, item)| format!("\"capql_col{i}\" AS {}", quote_ident(item.output_name.as_str())))
                            .collect(),
                    );
                    outer.filters.push("\"capql_having\"".to_string());
                    outer.plain = false;
                    outer
                }
                _ => {
                    sel.columns = Some(items.iter().map(|i| select_item(i, params)).collect());
                    sel.having = having.as_ref().map(|h| bound(h, params));
                    sel
                }
            }
        }
    }
}

/// Render the tree as a single SELECT. Literals become numbered parameters
/// in tree order; the output is deterministic for a given tree.
pub fn concretize(ast: &QueryAst) -> ConcreteQuery {
    let mut params = Vec::new();
    let sql = compile(ast, &mut params).sql();
    ConcreteQuery { sql, params }
}
