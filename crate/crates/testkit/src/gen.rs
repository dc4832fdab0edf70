//! Seeded generators for random tables, expressions and view trees.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use viewcap::sql::{AggFunc, BinaryOp, Expr, Ident, SelectItem, SqlValue, UnaryOp};
use viewcap::{AggregateSpec, Connection, RootAuthority, ViewValue};

use crate::oracle::{Db, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ty {
    Int,
    Text,
}

pub type Cols = Vec<(Ident, Ty)>;

pub const TEXTS: [&str; 6] = ["x", "y", "z", "o'q", "' OR 1=1 --", ""];

const COMPARISONS: [BinaryOp; 6] = [
    BinaryOp::Eq,
    BinaryOp::NotEq,
    BinaryOp::Lt,
    BinaryOp::LtEq,
    BinaryOp::Gt,
    BinaryOp::GtEq,
];

/// Two tables in one in-memory database, mirrored in an oracle [`Db`]:
/// `t1(id, a, b, c)` and `t2(k, d, e, f)`, with integer keys, small
/// integers and short texts, about a tenth NULL.
pub struct RandomDb {
    pub auth: RootAuthority,
    pub conn: Connection,
    pub db: Db,
}

pub const DB_NAME: &str = "random";

impl RandomDb {
    pub fn view(&self, table: &str) -> ViewValue {
        self.auth.make_view(DB_NAME, table).expect("table exists")
    }

    /// Current contents of `table`, ordered by key.
    pub fn load(&self, table: &str) -> Table {
        let t = &self.db.tables[table];
        let rs = self
            .conn
            .query(
                &format!("SELECT {} FROM {table} ORDER BY 1", t.columns.join(", ")),
                &[],
            )
            .expect("select");
        Table {
            name: table.to_string(),
            columns: t.columns.clone(),
            rows: rs.rows,
        }
    }
}

pub fn random_db(seed: u64, rows: usize) -> RandomDb {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conn = Connection::open_in_memory().expect("memory db");
    conn.execute_batch(
        "CREATE TABLE t1 (id INTEGER PRIMARY KEY, a INTEGER, b INTEGER, c TEXT);
         CREATE TABLE t2 (k INTEGER PRIMARY KEY, d INTEGER, e INTEGER, f TEXT);",
    )
    .expect("schema");
    let mut db = Db::default();
    for (name, cols) in [("t1", ["id", "a", "b", "c"]), ("t2", ["k", "d", "e", "f"])] {
        let mut t = Table {
            name: name.to_string(),
            columns: cols.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        };
        for i in 1..=rows as i64 {
            let row = vec![
                SqlValue::Integer(i),
                small_int(&mut rng),
                small_int(&mut rng),
                small_text(&mut rng),
            ];
            conn.execute(&format!("INSERT INTO {name} VALUES (?1, ?2, ?3, ?4)"), &row)
                .expect("insert");
            t.rows.push(row);
        }
        db.insert(t);
    }
    let auth = RootAuthority::with_connection(DB_NAME, conn.clone());
    RandomDb { auth, conn, db }
}

fn small_int(rng: &mut impl Rng) -> SqlValue {
    if rng.gen_bool(0.1) {
        SqlValue::Null
    } else {
        SqlValue::Integer(rng.gen_range(-5..=10))
    }
}

fn small_text(rng: &mut impl Rng) -> SqlValue {
    if rng.gen_bool(0.1) {
        SqlValue::Null
    } else {
        SqlValue::Text(TEXTS[rng.gen_range(0..3)].to_string())
    }
}

pub struct Gen {
    pub rng: ChaCha8Rng,
}

fn of(cols: &Cols, ty: Ty) -> Vec<Ident> {
    cols.iter().filter(|(_, t)| *t == ty).map(|(n, _)| n.clone()).collect()
}

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn int_literal(&mut self) -> Expr {
        Expr::literal(self.rng.gen_range(-5i64..=10))
    }

    pub fn text_literal(&mut self) -> Expr {
        Expr::literal(*TEXTS.choose(&mut self.rng).unwrap())
    }

    pub fn value(&mut self, ty: Ty) -> SqlValue {
        match ty {
            Ty::Int => small_int(&mut self.rng),
            Ty::Text => small_text(&mut self.rng),
        }
    }

    pub fn int_expr(&mut self, cols: &Cols, depth: u32) -> Expr {
        let ints = of(cols, Ty::Int);
        if depth <= 1 || self.rng.gen_bool(0.45) {
            return match ints.choose(&mut self.rng) {
                Some(c) if self.rng.gen_bool(0.7) => Expr::Column(c.clone()),
                _ if self.rng.gen_bool(0.05) => Expr::Literal(SqlValue::Null),
                _ => self.int_literal(),
            };
        }
        if self.rng.gen_bool(0.1) {
            return Expr::Unary(UnaryOp::Neg, Box::new(self.int_expr(cols, depth - 1)));
        }
        let op = *[BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div]
            .choose(&mut self.rng)
            .unwrap();
        Expr::binary(op, self.int_expr(cols, depth - 1), self.int_expr(cols, depth - 1))
    }

    fn comparison(&mut self) -> BinaryOp {
        *COMPARISONS.choose(&mut self.rng).unwrap()
    }

    /// A boolean-valued expression of at most `depth` levels.
    pub fn predicate(&mut self, cols: &Cols, depth: u32) -> Expr {
        if depth <= 1 || self.rng.gen_bool(0.4) {
            let texts = of(cols, Ty::Text);
            let pick = self.rng.gen_range(0..10);
            if pick < 2 && !cols.is_empty() {
                let (c, _) = cols.choose(&mut self.rng).unwrap().clone();
                return Expr::IsNull {
                    expr: Box::new(Expr::Column(c)),
                    negated: self.rng.gen_bool(0.5),
                };
            }
            if pick < 4 && !texts.is_empty() {
                let c = Expr::Column(texts.choose(&mut self.rng).unwrap().clone());
                let rhs = if texts.len() > 1 && self.rng.gen_bool(0.3) {
                    Expr::Column(texts.choose(&mut self.rng).unwrap().clone())
                } else {
                    self.text_literal()
                };
                let op = self.comparison();
                return Expr::binary(op, c, rhs);
            }
            let sub = depth.saturating_sub(1).max(1);
            let op = self.comparison();
            return Expr::binary(op, self.int_expr(cols, sub), self.int_expr(cols, sub));
        }
        match self.rng.gen_range(0..3) {
            0 => Expr::Unary(UnaryOp::Not, Box::new(self.predicate(cols, depth - 1))),
            1 => Expr::binary(BinaryOp::And, self.predicate(cols, depth - 1), self.predicate(cols, depth - 1)),
            _ => Expr::binary(BinaryOp::Or, self.predicate(cols, depth - 1), self.predicate(cols, depth - 1)),
        }
    }

    /// A non-empty projection without repeated output names. May include
    /// one computed integer column.
    pub fn projection(&mut self, cols: &Cols) -> (Vec<SelectItem>, Cols) {
        let mut items = Vec::new();
        let mut out: Cols = Vec::new();
        for (name, ty) in cols {
            if self.rng.gen_bool(0.6) {
                items.push(SelectItem::new(Expr::Column(name.clone())));
                out.push((name.clone(), *ty));
            }
        }
        if items.is_empty() || self.rng.gen_bool(0.3) {
            let e = self.int_expr(cols, 3);
            let item = SelectItem::new(e);
            if !out.iter().any(|(n, _)| *n == item.output_name) {
                out.push((item.output_name.clone(), Ty::Int));
                items.push(item);
            }
        }
        if items.is_empty() {
            let (name, ty) = cols[0].clone();
            items.push(SelectItem::new(Expr::Column(name.clone())));
            out.push((name, ty));
        }
        (items, out)
    }

    pub fn aggregation(&mut self, cols: &Cols) -> (AggregateSpec, Cols) {
        let mut items = Vec::new();
        let mut out: Cols = Vec::new();
        let mut group_by = Vec::new();
        if self.rng.gen_bool(0.5) {
            let (g, ty) = cols.choose(&mut self.rng).unwrap().clone();
            items.push(SelectItem::new(Expr::Column(g.clone())));
            out.push((g.clone(), ty));
            group_by.push(g);
        }
        let ints = of(cols, Ty::Int);
        for _ in 0..self.rng.gen_range(1..=2) {
            let (func, arg, ty) = match self.rng.gen_range(0..5) {
                0 => (AggFunc::Count, None, Ty::Int),
                1 => {
                    let (c, _) = cols.choose(&mut self.rng).unwrap().clone();
                    (AggFunc::Count, Some(c), Ty::Int)
                }
                2 if !ints.is_empty() => (AggFunc::Sum, Some(ints.choose(&mut self.rng).unwrap().clone()), Ty::Int),
                3 => {
                    let (c, t) = cols.choose(&mut self.rng).unwrap().clone();
                    (AggFunc::Min, Some(c), t)
                }
                _ => {
                    let (c, t) = cols.choose(&mut self.rng).unwrap().clone();
                    (AggFunc::Max, Some(c), t)
                }
            };
            let item = SelectItem::new(Expr::Aggregate {
                func,
                arg: arg.map(|c| Box::new(Expr::Column(c))),
            });
            if !out.iter().any(|(n, _)| *n == item.output_name) {
                out.push((item.output_name.clone(), ty));
                items.push(item);
            }
        }
        let having = self.rng.gen_bool(0.3).then(|| {
            Expr::binary(
                self.comparison(),
                Expr::Aggregate {
                    func: AggFunc::Count,
                    arg: None,
                },
                Expr::literal(self.rng.gen_range(0i64..6)),
            )
        });
        (
            AggregateSpec {
                items,
                group_by,
                having,
            },
            out,
        )
    }

    fn base(&mut self, rdb: &RandomDb, table: &str) -> (ViewValue, Cols) {
        let v = rdb.view(table);
        let cols = v
            .schema()
            .columns
            .iter()
            .map(|c| {
                let ty = if c.declared_type.eq_ignore_ascii_case("TEXT") { Ty::Text } else { Ty::Int };
                (c.name.clone(), ty)
            })
            .collect();
        (v, cols)
    }

    /// Apply one random derivation; aggregation only when `allow_agg`.
    pub fn step(&mut self, v: &ViewValue, cols: &Cols, allow_agg: bool) -> (ViewValue, Cols) {
        match self.rng.gen_range(0..if allow_agg { 6 } else { 5 }) {
            0..=2 => {
                let p = self.predicate(cols, 4);
                (v.filter(p).expect("generated predicate is valid"), cols.clone())
            }
            3 | 4 => {
                let (items, out) = self.projection(cols);
                (v.select(items).expect("generated projection is valid"), out)
            }
            _ => {
                let (spec, out) = self.aggregation(cols);
                (v.aggregate_with(spec).expect("generated aggregate is valid"), out)
            }
        }
    }

    /// A random view over the two tables: up to four derivations, possibly
    /// a join, at most one aggregation.
    pub fn view(&mut self, rdb: &RandomDb) -> (ViewValue, Cols) {
        let (mut v, mut cols) = match self.rng.gen_range(0..3) {
            0 => self.base(rdb, "t1"),
            1 => self.base(rdb, "t2"),
            _ => {
                let (mut l, mut lc) = self.base(rdb, "t1");
                let (mut r, mut rc) = self.base(rdb, "t2");
                if self.rng.gen_bool(0.5) {
                    (l, lc) = self.step(&l, &lc, false);
                }
                if self.rng.gen_bool(0.5) {
                    (r, rc) = self.step(&r, &rc, false);
                }
                let clash = lc.iter().any(|(n, _)| rc.iter().any(|(m, _)| m == n));
                if clash {
                    (l, lc)
                } else {
                    let mut all = lc.clone();
                    all.extend(rc.iter().cloned());
                    let pred = match self.rng.gen_range(0..3) {
                        0 => None,
                        1 => {
                            let li = of(&lc, Ty::Int);
                            let ri = of(&rc, Ty::Int);
                            match (li.choose(&mut self.rng), ri.choose(&mut self.rng)) {
                                (Some(a), Some(b)) => Some(Expr::binary(
                                    BinaryOp::Eq,
                                    Expr::Column(a.clone()),
                                    Expr::Column(b.clone()),
                                )),
                                _ => None,
                            }
                        }
                        _ => Some(self.predicate(&all, 3)),
                    };
                    (l.join_on(&r, pred).expect("generated join is valid"), all)
                }
            }
        };
        let mut aggregated = false;
        for _ in 0..self.rng.gen_range(0..=3) {
            let before = v.ast().depth();
            let (nv, nc) = self.step(&v, &cols, !aggregated);
            aggregated |= nv.ast().depth() > before
                && matches!(nv.ast().node(), viewcap::query::Node::Aggregate { .. });
            v = nv;
            cols = nc;
        }
        (v, cols)
    }

    /// A Where/Project chain over `t1`, as used for writes.
    pub fn chain_view(&mut self, rdb: &RandomDb) -> (ViewValue, Cols) {
        let (mut v, mut cols) = self.base(rdb, "t1");
        for _ in 0..self.rng.gen_range(0..=3) {
            (v, cols) = self.step(&v, &cols, false);
        }
        (v, cols)
    }
}
