//! Single-operation benchmarks over `t(a INTEGER PRIMARY KEY, b INTEGER)`.

use std::path::Path;
use std::time::Instant;

use viewcap::{sqlformat, Connection, Result, RootAuthority, SqlValue, Validation, ViewValue};

use crate::report::BenchResult;

const DB: &str = "micro.db";

pub const BASELINE: &str = "baseline";
pub const CAPQL: &str = "capql";
pub const CAPQL_NO_TRIGGERS: &str = "capql-no-triggers";

/// One operation in a raw-SQL form and a capability form. `k` is the
/// exclusive upper bound of the key range `a < k`.
pub trait Micro: Send + Sync {
    fn name(&self) -> &'static str;
    fn checks(&self) -> bool {
        true
    }
    /// Read-only operations are timed over several runs on one table.
    fn iterations(&self) -> u32 {
        1
    }
    fn baseline(&self, conn: &Connection, k: i64) -> Result<usize>;
    fn capql(&self, t: &ViewValue, k: i64) -> Result<usize>;
}

fn range(t: &ViewValue, k: i64) -> Result<ViewValue> {
    t.filter(sqlformat("a < $1", &[k.into()])?)
}

pub struct Where;

impl Micro for Where {
    fn name(&self) -> &'static str {
        "where"
    }
    fn iterations(&self) -> u32 {
        20
    }
    fn baseline(&self, conn: &Connection, k: i64) -> Result<usize> {
        Ok(conn.query("SELECT a, b FROM t WHERE a < ?1", &[k.into()])?.len())
    }
    fn capql(&self, t: &ViewValue, k: i64) -> Result<usize> {
        Ok(range(t, k)?.fetch()?.len())
    }
}

pub struct Delete;

impl Micro for Delete {
    fn name(&self) -> &'static str {
        "delete"
    }
    fn baseline(&self, conn: &Connection, k: i64) -> Result<usize> {
        conn.execute("DELETE FROM t WHERE a < ?1", &[k.into()])
    }
    fn capql(&self, t: &ViewValue, k: i64) -> Result<usize> {
        range(t, k)?.delete(None)
    }
}

pub struct Update {
    pub checks: bool,
}

impl Micro for Update {
    fn name(&self) -> &'static str {
        if self.checks {
            "update"
        } else {
            "update-nt"
        }
    }
    fn checks(&self) -> bool {
        self.checks
    }
    fn baseline(&self, conn: &Connection, k: i64) -> Result<usize> {
        conn.execute("UPDATE t SET b = b - 1 WHERE a < ?1", &[k.into()])
    }
    fn capql(&self, t: &ViewValue, k: i64) -> Result<usize> {
        range(t, k)?.update("b = b - 1", None)
    }
}

pub struct Insert {
    pub checks: bool,
}

const INSERTED: i64 = 10;

impl Micro for Insert {
    fn name(&self) -> &'static str {
        if self.checks {
            "insert"
        } else {
            "insert-nt"
        }
    }
    fn checks(&self) -> bool {
        self.checks
    }
    fn baseline(&self, conn: &Connection, _k: i64) -> Result<usize> {
        let values: Vec<SqlValue> = (1..=INSERTED).flat_map(|i| [(-i).into(), i.into()]).collect();
        let slots: Vec<String> = (1..=INSERTED).map(|i| format!("(?{}, ?{})", 2 * i - 1, 2 * i)).collect();
        conn.execute(&format!("INSERT INTO t (a, b) VALUES {}", slots.join(", ")), &values)
    }
    fn capql(&self, t: &ViewValue, k: i64) -> Result<usize> {
        let rows = (1..=INSERTED).map(|i| vec![SqlValue::Integer(-i), SqlValue::Integer(i)]).collect();
        range(t, k)?.insert(&["a", "b"], rows)
    }
}

type Constructor = fn() -> Box<dyn Micro>;

pub const MICROS: [(&str, Constructor); 6] = [
    ("where", || Box::new(Where)),
    ("delete", || Box::new(Delete)),
    ("update", || Box::new(Update { checks: true })),
    ("update-nt", || Box::new(Update { checks: false })),
    ("insert", || Box::new(Insert { checks: true })),
    ("insert-nt", || Box::new(Insert { checks: false })),
];

pub fn names() -> Vec<&'static str> {
    MICROS.iter().map(|(n, _)| *n).collect()
}

pub fn by_name(name: &str) -> Option<Box<dyn Micro>> {
    MICROS.iter().find(|(n, _)| *n == name).map(|(_, make)| make())
}

/// Bound `k` such that exactly `percent`% of `rows` satisfy `a < k`.
pub fn bound(rows: i64, percent: f64) -> i64 {
    ((rows as f64) * percent / 100.0).round() as i64
}

fn coprime_step(n: i64) -> i64 {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    (7919..).find(|p| gcd(*p, n.max(1)) == 1).expect("some step is coprime")
}

/// A fresh table with keys `0..rows` and `b` a permutation of them.
pub fn create_table(dir: &Path, rows: i64) -> Result<RootAuthority> {
    let path = dir.join(DB);
    let _ = std::fs::remove_file(&path);
    let conn = Connection::create(&path)?;
    conn.execute_batch("CREATE TABLE t (a INTEGER PRIMARY KEY, b INTEGER)")?;
    if rows > 0 {
        conn.execute(
            "WITH RECURSIVE c(i) AS (SELECT 0 UNION ALL SELECT i + 1 FROM c WHERE i + 1 < ?1) \
             INSERT INTO t (a, b) SELECT i, (i * ?2) % ?1 FROM c",
            &[rows.into(), coprime_step(rows).into()],
        )?;
    }
    Ok(RootAuthority::new([(DB.to_string(), path)]))
}

fn time_one(
    micro: &dyn Micro,
    capql: bool,
    dir: &Path,
    rows: i64,
    k: i64,
    validation: Validation,
) -> Result<(f64, usize)> {
    let auth = create_table(dir, rows)?;
    let conn = auth.connection(DB)?;
    conn.set_validation(validation);
    conn.set_check_enforcement(micro.checks());
    conn.query("SELECT COUNT(*) FROM t", &[])?;
    let t = auth.make_view(DB, "t")?;
    let runs = micro.iterations();
    let start = Instant::now();
    let mut n = 0;
    for _ in 0..runs {
        n = if capql {
            micro.capql(&t, k)?
        } else {
            micro.baseline(&conn, k)?
        };
    }
    Ok((start.elapsed().as_secs_f64() * 1e3 / runs as f64, n))
}

/// Times the raw and capability forms, alternating their order across
/// repetitions, each on a freshly built table. Returns (baseline, capql).
pub fn run_micro(
    micro: &dyn Micro,
    rows: i64,
    percent: f64,
    reps: usize,
    validation: Validation,
) -> Result<(BenchResult, BenchResult)> {
    let k = bound(rows, percent);
    let mut base = Vec::with_capacity(reps);
    let mut cap = Vec::with_capacity(reps);
    for rep in 0..reps {
        let dir = tempfile::tempdir().map_err(|e| viewcap::Error::Io(e.to_string()))?;
        for capql in [rep % 2 == 0, rep % 2 == 1] {
            let (ms, n) = time_one(micro, capql, dir.path(), rows, k, validation)?;
            if capql {
                cap.push(ms);
            } else {
                base.push(ms);
            }
            let expected = match micro.name() {
                "insert" | "insert-nt" => INSERTED as usize,
                _ => k as usize,
            };
            if n != expected {
                return Err(viewcap::Error::Io(format!(
                    "{} affected {n} rows, expected {expected}",
                    micro.name()
                )));
            }
        }
    }
    let capql_label = if micro.checks() { CAPQL } else { CAPQL_NO_TRIGGERS };
    Ok((
        BenchResult::new(BASELINE, micro.name(), Some(percent), &base),
        BenchResult::new(capql_label, micro.name(), Some(percent), &cap),
    ))
}
