//! A row-at-a-time evaluator for view trees, independent of the engine and
//! of the query compiler. Semantics follow SQLite for the values the
//! generators produce: integers, text and NULL.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use viewcap::query::Node;
use viewcap::sql::{AggFunc, BinaryOp, Expr, Ident, SqlValue, UnaryOp};
use viewcap::{QueryAst, ViewSchema};

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<SqlValue>>,
}

impl Table {
    pub fn index(&self, column: &Ident) -> usize {
        self.columns
            .iter()
            .position(|c| column.matches(c))
            .unwrap_or_else(|| panic!("no column {column} in {}", self.name))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Db {
    pub tables: BTreeMap<String, Table>,
}

impl Db {
    pub fn insert(&mut self, t: Table) {
        self.tables.insert(t.name.to_ascii_lowercase(), t);
    }

    pub fn table(&self, name: &Ident) -> &Table {
        &self.tables[&name.as_str().to_ascii_lowercase()]
    }

    pub fn table_mut(&mut self, name: &Ident) -> &mut Table {
        self.tables
            .get_mut(&name.as_str().to_ascii_lowercase())
            .expect("known table")
    }
}

pub fn truthy(v: &SqlValue) -> bool {
    match v {
        SqlValue::Integer(i) => *i != 0,
        SqlValue::Real(r) => *r != 0.0,
        SqlValue::Null => false,
        SqlValue::Text(s) => s.trim().parse::<f64>().is_ok_and(|f| f != 0.0),
    }
}

fn tri(v: &SqlValue) -> Option<bool> {
    if v.is_null() {
        None
    } else {
        Some(truthy(v))
    }
}

fn from_tri(b: Option<bool>) -> SqlValue {
    match b {
        None => SqlValue::Null,
        Some(b) => SqlValue::Integer(b as i64),
    }
}

/// SQLite's cross-type order: NULL < numbers < text.
pub fn compare(a: &SqlValue, b: &SqlValue) -> Ordering {
    use SqlValue::*;
    fn rank(v: &SqlValue) -> u8 {
        match v {
            Null => 0,
            Integer(_) | Real(_) => 1,
            Text(_) => 2,
        }
    }
    match (a, b) {
        (Integer(x), Integer(y)) => x.cmp(y),
        (Integer(x), Real(y)) => (*x as f64).partial_cmp(y).unwrap_or(Ordering::Equal),
        (Real(x), Integer(y)) => x.partial_cmp(&(*y as f64)).unwrap_or(Ordering::Equal),
        (Real(x), Real(y)) => x.partial_cmp(y).unwrap_or(Ordering::Equal),
        (Text(x), Text(y)) => x.as_bytes().cmp(y.as_bytes()),
        _ => rank(a).cmp(&rank(b)),
    }
}

fn arith(op: BinaryOp, a: &SqlValue, b: &SqlValue) -> SqlValue {
    use SqlValue::*;
    let num = |v: &SqlValue| match v {
        Integer(i) => Some(Integer(*i)),
        Real(r) => Some(Real(*r)),
        Text(s) => Some(s.trim().parse::<i64>().map(Integer).unwrap_or(Integer(0))),
        Null => None,
    };
    let (Some(a), Some(b)) = (num(a), num(b)) else {
        return Null;
    };
    match (a, b) {
        (Integer(x), Integer(y)) => match op {
            BinaryOp::Add => Integer(x + y),
            BinaryOp::Sub => Integer(x - y),
            BinaryOp::Mul => Integer(x * y),
            BinaryOp::Div if y == 0 => Null,
            BinaryOp::Div => Integer(x / y),
            _ => unreachable!(),
        },
        (x, y) => {
            let f = |v: SqlValue| match v {
                Integer(i) => i as f64,
                Real(r) => r,
                _ => unreachable!(),
            };
            let (x, y) = (f(x), f(y));
            match op {
                BinaryOp::Add => Real(x + y),
                BinaryOp::Sub => Real(x - y),
                BinaryOp::Mul => Real(x * y),
                BinaryOp::Div if y == 0.0 => Null,
                BinaryOp::Div => Real(x / y),
                _ => unreachable!(),
            }
        }
    }
}

/// Evaluate a scalar expression against one row of `schema`.
pub fn eval(e: &Expr, schema: &ViewSchema, row: &[SqlValue]) -> SqlValue {
    match e {
        Expr::Column(c) => row[schema.resolve(c).expect("generated names resolve")].clone(),
        Expr::Literal(v) => v.clone(),
        Expr::Unary(UnaryOp::Neg, x) => match eval(x, schema, row) {
            SqlValue::Integer(i) => SqlValue::Integer(-i),
            SqlValue::Real(r) => SqlValue::Real(-r),
            SqlValue::Null => SqlValue::Null,
            t => arith(BinaryOp::Sub, &SqlValue::Integer(0), &t),
        },
        Expr::Unary(UnaryOp::Not, x) => from_tri(tri(&eval(x, schema, row)).map(|b| !b)),
        Expr::IsNull { expr, negated } => {
            SqlValue::Integer((eval(expr, schema, row).is_null() != *negated) as i64)
        }
        Expr::Binary(op, l, r) => {
            let (l, r) = (eval(l, schema, row), eval(r, schema, row));
            binary(*op, &l, &r)
        }
        Expr::Aggregate { .. } => panic!("aggregate outside an aggregation"),
    }
}

fn binary(op: BinaryOp, l: &SqlValue, r: &SqlValue) -> SqlValue {
    match op {
        BinaryOp::And => from_tri(match (tri(l), tri(r)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        }),
        BinaryOp::Or => from_tri(match (tri(l), tri(r)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        }),
        BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => arith(op, l, r),
        cmp => {
            if l.is_null() || r.is_null() {
                return SqlValue::Null;
            }
            let o = compare(l, r);
            SqlValue::Integer(match cmp {
                BinaryOp::Eq => o == Ordering::Equal,
                BinaryOp::NotEq => o != Ordering::Equal,
                BinaryOp::Lt => o == Ordering::Less,
                BinaryOp::LtEq => o != Ordering::Greater,
                BinaryOp::Gt => o == Ordering::Greater,
                BinaryOp::GtEq => o != Ordering::Less,
                _ => unreachable!(),
            } as i64)
        }
    }
}

fn aggregate_value(func: AggFunc, arg: Option<&Expr>, schema: &ViewSchema, rows: &[Vec<SqlValue>]) -> SqlValue {
    let values: Vec<SqlValue> = match arg {
        None => return SqlValue::Integer(rows.len() as i64),
        Some(a) => rows
            .iter()
            .map(|r| eval(a, schema, r))
            .filter(|v| !v.is_null())
            .collect(),
    };
    match func {
        AggFunc::Count => SqlValue::Integer(values.len() as i64),
        _ if values.is_empty() => SqlValue::Null,
        AggFunc::Sum => values
            .iter()
            .skip(1)
            .fold(values[0].clone(), |acc, v| arith(BinaryOp::Add, &acc, v)),
        AggFunc::Avg => {
            let sum: f64 = values
                .iter()
                .map(|v| match v {
                    SqlValue::Integer(i) => *i as f64,
                    SqlValue::Real(r) => *r,
                    _ => 0.0,
                })
                .sum();
            SqlValue::Real(sum / values.len() as f64)
        }
        AggFunc::Min => values.iter().min_by(|a, b| compare(a, b)).cloned().unwrap(),
        AggFunc::Max => values.iter().max_by(|a, b| compare(a, b)).cloned().unwrap(),
    }
}

fn eval_group(e: &Expr, schema: &ViewSchema, rows: &[Vec<SqlValue>]) -> SqlValue {
    match e {
        Expr::Aggregate { func, arg } => aggregate_value(*func, arg.as_deref(), schema, rows),
        Expr::Column(_) => match rows.first() {
            Some(r) => eval(e, schema, r),
            None => SqlValue::Null,
        },
        Expr::Literal(v) => v.clone(),
        Expr::Unary(op, x) => {
            let inner = eval_group(x, schema, rows);
            let tmp = ViewSchema::new(Vec::new());
            eval(&Expr::Unary(*op, Box::new(Expr::Literal(inner))), &tmp, &[])
        }
        Expr::IsNull { expr, negated } => {
            SqlValue::Integer((eval_group(expr, schema, rows).is_null() != *negated) as i64)
        }
        Expr::Binary(op, l, r) => binary(*op, &eval_group(l, schema, rows), &eval_group(r, schema, rows)),
    }
}

/// All rows a view denotes, in no particular order.
pub fn eval_query(ast: &QueryAst, db: &Db) -> Vec<Vec<SqlValue>> {
    match ast.node() {
        Node::Base { table } => {
            let t = db.table(table);
            let order: Vec<usize> = ast
                .schema()
                .columns
                .iter()
                .map(|c| t.index(&c.name))
                .collect();
            t.rows
                .iter()
                .map(|r| order.iter().map(|&i| r[i].clone()).collect())
                .collect()
        }
        Node::Where { child, pred } => eval_query(child, db)
            .into_iter()
            .filter(|r| truthy(&eval(pred, child.schema(), r)))
            .collect(),
        Node::Project { child, items } => eval_query(child, db)
            .into_iter()
            .map(|r| items.iter().map(|i| eval(&i.expr, child.schema(), &r)).collect())
            .collect(),
        Node::Join { left, right, pred } => {
            let (l, r) = (eval_query(left, db), eval_query(right, db));
            let mut out = Vec::new();
            for a in &l {
                for b in &r {
                    let row: Vec<SqlValue> = a.iter().chain(b).cloned().collect();
                    if pred.as_ref().is_none_or(|p| truthy(&eval(p, ast.schema(), &row))) {
                        out.push(row);
                    }
                }
            }
            out
        }
        Node::Aggregate {
            child,
            items,
            group_by,
            having,
        } => {
            let rows = eval_query(child, db);
            let schema = child.schema();
            let mut groups: Vec<(Vec<SqlValue>, Vec<Vec<SqlValue>>)> = Vec::new();
            if group_by.is_empty() {
                groups.push((Vec::new(), rows));
            } else {
                let idx: Vec<usize> = group_by.iter().map(|g| schema.resolve(g).unwrap()).collect();
                for r in rows {
                    let key: Vec<SqlValue> = idx.iter().map(|&i| r[i].clone()).collect();
                    match groups.iter_mut().find(|(k, _)| {
                        k.iter().zip(&key).all(|(a, b)| compare(a, b) == Ordering::Equal)
                    }) {
                        Some((_, members)) => members.push(r),
                        None => groups.push((key, vec![r])),
                    }
                }
            }
            groups
                .into_iter()
                .filter(|(_, members)| {
                    having
                        .as_ref()
                        .is_none_or(|h| truthy(&eval_group(h, schema, members)))
                })
                .map(|(_, members)| {
                    items
                        .iter()
                        .map(|i| eval_group(&i.expr, schema, &members))
                        .collect()
                })
                .collect()
        }
    }
}

/// Rows sorted into a canonical order for multiset comparison.
pub fn canonical(mut rows: Vec<Vec<SqlValue>>) -> Vec<Vec<SqlValue>> {
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| compare(x, y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    rows
}

/// Walks a Where/Project chain for one base row: whether the row survives
/// every definition predicate, and its image in the view.
pub fn walk(ast: &QueryAst, base_row: &[SqlValue], base: &Table) -> (bool, Vec<SqlValue>) {
    match ast.node() {
        Node::Base { .. } => {
            let row = ast
                .schema()
                .columns
                .iter()
                .map(|c| base_row[base.index(&c.name)].clone())
                .collect();
            (true, row)
        }
        Node::Where { child, pred } => {
            let (ok, row) = walk(child, base_row, base);
            let pass = ok && truthy(&eval(pred, child.schema(), &row));
            (pass, row)
        }
        Node::Project { child, items } => {
            let (ok, row) = walk(child, base_row, base);
            (ok, items.iter().map(|i| eval(&i.expr, child.schema(), &row)).collect())
        }
        _ => panic!("walk only handles Where/Project chains"),
    }
}

/// Whether update/delete must refuse the view because a definition
/// predicate mentions a column the view no longer shows.
pub fn hides_predicate_columns(ast: &QueryAst) -> bool {
    ast.definition_predicates()
        .iter()
        .any(|p| p.mentions().iter().any(|c| ast.schema().resolve(c).is_err()))
}

/// Expected effect of a write: the new table, or `Err` when a row written
/// would violate the view's predicates.
pub type Prediction = Result<Table, ()>;

pub fn predict_delete(ast: &QueryAst, scope: Option<&Expr>, base: &Table) -> Table {
    let mut out = base.clone();
    out.rows.retain(|r| {
        let (ok, img) = walk(ast, r, base);
        !(ok && scope.is_none_or(|s| truthy(&eval(s, ast.schema(), &img))))
    });
    out
}

pub fn predict_update(
    ast: &QueryAst,
    set: &[(Ident, Expr)],
    scope: Option<&Expr>,
    base: &Table,
) -> Prediction {
    let mut out = base.clone();
    for r in out.rows.iter_mut() {
        let (ok, img) = walk(ast, r, base);
        if !(ok && scope.is_none_or(|s| truthy(&eval(s, ast.schema(), &img)))) {
            continue;
        }
        let new: Vec<(usize, SqlValue)> = set
            .iter()
            .map(|(col, e)| {
                let target = match &ast.schema().column(col).expect("visible").origin {
                    viewcap::query::Origin::Base { column, .. } => base.index(column),
                    viewcap::query::Origin::Derived => panic!("derived target"),
                };
                (target, eval(e, ast.schema(), &img))
            })
            .collect();
        for (i, v) in new {
            r[i] = v;
        }
        if !walk(ast, r, base).0 {
            return Err(());
        }
    }
    Ok(out)
}

/// `key` is the rowid-alias column, filled with max + 1 per row.
pub fn predict_insert(
    ast: &QueryAst,
    columns: &[Ident],
    rows: &[Vec<SqlValue>],
    base: &Table,
    key: &str,
) -> Prediction {
    let mut out = base.clone();
    let key = base.index(&Ident::new(key));
    let mut next = base
        .rows
        .iter()
        .filter_map(|r| r[key].as_i64())
        .max()
        .unwrap_or(0);
    for values in rows {
        next += 1;
        let mut row = vec![SqlValue::Null; base.columns.len()];
        row[key] = SqlValue::Integer(next);
        for (c, v) in columns.iter().zip(values) {
            let target = match &ast.schema().column(c).expect("visible").origin {
                viewcap::query::Origin::Base { column, .. } => base.index(column),
                viewcap::query::Origin::Derived => panic!("derived target"),
            };
            row[target] = v.clone();
        }
        if !walk(ast, &row, base).0 {
            return Err(());
        }
        out.rows.push(row);
    }
    Ok(out)
}
