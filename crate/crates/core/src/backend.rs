//! Engine connections and check-option enforcement.
//!
//! Inserts and updates through a constrained view run with a temporary,
//! connection-local trigger that aborts the statement when a written row
//! does not satisfy the view's predicate. Values referenced by the trigger
//! are bound through a temp table, so statement text never carries data.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use rusqlite::types::{ToSqlOutput, Value as EngineValue, ValueRef};
use rusqlite::{params_from_iter, OpenFlags, ToSql};
use serde::Serialize;

use crate::error::{DmlKind, Error, Result};
use crate::query::{ColumnInfo, Origin, Validation, ViewSchema};
use crate::sql::{quote_ident, write_expr, Assignment, BindSink, Expr, Ident, SqlSink, SqlValue};

const TRIGGER_PREFIX: &str = "capql_check_";

impl ToSql for SqlValue {
    fn to_sql(&self) -> rusqlite::Result<ToSqlOutput<'_>> {
        Ok(match self {
            SqlValue::Integer(i) => ToSqlOutput::Borrowed(ValueRef::Integer(*i)),
            SqlValue::Real(r) => ToSqlOutput::Borrowed(ValueRef::Real(*r)),
            SqlValue::Text(s) => ToSqlOutput::Borrowed(ValueRef::Text(s.as_bytes())),
            SqlValue::Null => ToSqlOutput::Borrowed(ValueRef::Null),
        })
    }
}

fn from_engine(v: EngineValue) -> SqlValue {
    match v {
        EngineValue::Null => SqlValue::Null,
        EngineValue::Integer(i) => SqlValue::Integer(i),
        EngineValue::Real(r) => SqlValue::Real(r),
        EngineValue::Text(s) => SqlValue::Text(s),
        EngineValue::Blob(b) => SqlValue::Text(String::from_utf8_lossy(&b).into_owned()),
    }
}

/// Materialized query result.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RowSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<SqlValue>>,
}

impl RowSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.eq_ignore_ascii_case(name))
    }

    /// Values of one column, in row order.
    pub fn column(&self, name: &str) -> Option<Vec<&SqlValue>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DmlOutcome {
    pub affected_rows: usize,
}

struct Shared {
    db: Mutex<rusqlite::Connection>,
    statements: AtomicU64,
    enforce_checks: AtomicBool,
    validate: AtomicBool,
    label: String,
}

/// A handle to one engine connection.
///
/// Clones share the connection; a connection serializes its own use. Open
/// distinct connections for concurrent work on the same file.
#[derive(Clone)]
pub struct Connection {
    shared: Arc<Shared>,
}

impl std::fmt::Debug for Connection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Connection").field("db", &self.shared.label).finish()
    }
}

fn map_open_error(path: &str, err: rusqlite::Error) -> Error {
    match err.sqlite_error_code() {
        Some(rusqlite::ErrorCode::NotADatabase) => Error::NotADatabase(path.to_string()),
        _ => Error::Io(format!("{path}: {err}")),
    }
}

impl Connection {
    /// Open an existing database file, or `:memory:` for a blank database.
    pub fn open(path: impl AsRef<Path>) -> Result<Connection> {
        let path = path.as_ref();
        let label = path.display().to_string();
        let db = if label == ":memory:" {
            rusqlite::Connection::open_in_memory()
        } else {
            rusqlite::Connection::open_with_flags(
                path,
                OpenFlags::SQLITE_OPEN_READ_WRITE
                    | OpenFlags::SQLITE_OPEN_URI
                    | OpenFlags::SQLITE_OPEN_NO_MUTEX,
            )
        }
        .map_err(|e| map_open_error(&label, e))?;
        Self::finish_open(db, label)
    }

    /// Create (or open) a database file, creating it when missing.
    pub fn create(path: impl AsRef<Path>) -> Result<Connection> {
        let path = path.as_ref();
        let label = path.display().to_string();
        let db = rusqlite::Connection::open(path).map_err(|e| map_open_error(&label, e))?;
        Self::finish_open(db, label)
    }

    pub fn open_in_memory() -> Result<Connection> {
        Self::open(":memory:")
    }

    fn finish_open(db: rusqlite::Connection, label: String) -> Result<Connection> {
        db.execute_batch("PRAGMA foreign_keys = ON")
            .map_err(|e| map_open_error(&label, e))?;
        db.query_row("SELECT count(*) FROM sqlite_master", [], |r| r.get::<_, i64>(0))
            .map_err(|e| map_open_error(&label, e))?;
        db.set_prepared_statement_cache_capacity(64);
        Ok(Connection {
            shared: Arc::new(Shared {
                db: Mutex::new(db),
                statements: AtomicU64::new(0),
                enforce_checks: AtomicBool::new(true),
                validate: AtomicBool::new(true),
                label,
            }),
        })
    }

    fn lock(&self) -> MutexGuard<'_, rusqlite::Connection> {
        self.shared.db.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Number of statements this connection has sent to the engine.
    pub fn statement_count(&self) -> u64 {
        self.shared.statements.load(Ordering::Relaxed)
    }

    fn count(&self) {
        self.shared.statements.fetch_add(1, Ordering::Relaxed);
    }

    /// Whether guarded inserts and updates install check triggers.
    pub fn set_check_enforcement(&self, on: bool) {
        self.shared.enforce_checks.store(on, Ordering::Relaxed);
    }

    pub fn check_enforcement(&self) -> bool {
        self.shared.enforce_checks.load(Ordering::Relaxed)
    }

    /// Whether views derived over this connection resolve expressions when
    /// they are built.
    pub fn set_validation(&self, mode: Validation) {
        self.shared.validate.store(mode == Validation::On, Ordering::Relaxed);
    }

    pub fn validation(&self) -> Validation {
        if self.shared.validate.load(Ordering::Relaxed) {
            Validation::On
        } else {
            Validation::Off
        }
    }

    pub fn same_connection(&self, other: &Connection) -> bool {
        Arc::ptr_eq(&self.shared, &other.shared)
    }

    /// Run setup SQL (schema creation, fixtures). Not for user data.
    pub fn execute_batch(&self, sql: &str) -> Result<()> {
        self.count();
        self.lock()
            .execute_batch(sql)
            .map_err(|e| Error::engine(sql, e))
    }

    /// Execute one statement with bound parameters.
    pub fn execute(&self, sql: &str, params: &[SqlValue]) -> Result<usize> {
        let db = self.lock();
        self.execute_locked(&db, sql, params)
    }

    fn execute_locked(&self, db: &rusqlite::Connection, sql: &str, params: &[SqlValue]) -> Result<usize> {
        self.count();
        let mut stmt = db.prepare_cached(sql).map_err(|e| Error::engine(sql, e))?;
        stmt.execute(params_from_iter(params.iter()))
            .map_err(|e| Error::engine(sql, e))
    }

    /// Run a query with bound parameters and materialize the rows.
    pub fn query(&self, sql: &str, params: &[SqlValue]) -> Result<RowSet> {
        let db = self.lock();
        self.count();
        let mut stmt = db.prepare_cached(sql).map_err(|e| Error::engine(sql, e))?;
        let columns: Vec<String> = stmt.column_names().iter().map(|c| c.to_string()).collect();
        let width = columns.len();
        let rows = stmt
            .query_map(params_from_iter(params.iter()), |row| {
                (0..width)
                    .map(|i| row.get::<_, EngineValue>(i).map(from_engine))
                    .collect::<rusqlite::Result<Vec<_>>>()
            })
            .map_err(|e| Error::engine(sql, e))?
            .collect::<rusqlite::Result<Vec<_>>>()
            .map_err(|e| Error::engine(sql, e))?;
        Ok(RowSet { columns, rows })
    }

    /// Column metadata for a table, including foreign-key targets.
    pub fn table_schema(&self, table: &str) -> Result<ViewSchema> {
        let db = self.lock();
        let sql = "SELECT name, type, \"notnull\", dflt_value, pk FROM pragma_table_info(?1)";
        self.count();
        let mut stmt = db.prepare_cached(sql).map_err(|e| Error::engine(sql, e))?;
        let raw: Vec<(String, String, bool, bool, i64)> = stmt
            .query_map([table], |r| {
                Ok((
                    r.get(0)?,
                    r.get(1)?,
                    r.get::<_, i64>(2)? != 0,
                    r.get::<_, Option<String>>(3)?.is_some(),
                    r.get(4)?,
                ))
            })
            .map_err(|e| Error::engine(sql, e))?
            .collect::<rusqlite::Result<_>>()
            .map_err(|e| Error::engine(sql, e))?;
        if raw.is_empty() {
            return Err(Error::UnknownTable(table.to_string()));
        }
        let fk_sql = "SELECT \"from\", \"table\", \"to\" FROM pragma_foreign_key_list(?1)";
        self.count();
        let mut fk_stmt = db.prepare_cached(fk_sql).map_err(|e| Error::engine(fk_sql, e))?;
        let fks: Vec<(String, String, Option<String>)> = fk_stmt
            .query_map([table], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)))
            .map_err(|e| Error::engine(fk_sql, e))?
            .collect::<rusqlite::Result<_>>()
            .map_err(|e| Error::engine(fk_sql, e))?;
        let pk_count = raw.iter().filter(|c| c.4 > 0).count();
        let columns = raw
            .into_iter()
            .map(|(name, ty, notnull, has_default, pk)| {
                let rowid_alias = pk > 0 && pk_count == 1 && ty.eq_ignore_ascii_case("INTEGER");
                let references = fks
                    .iter()
                    .find(|(from, _, _)| from.eq_ignore_ascii_case(&name))
                    .map(|(_, t, to)| (Ident::new(t.clone()), Ident::new(to.clone().unwrap_or_default())));
                ColumnInfo {
                    origin: Origin::Base {
                        table: Ident::new(table),
                        column: Ident::new(name.clone()),
                    },
                    name: Ident::new(name),
                    declared_type: ty,
                    nullable: !notnull,
                    has_default: has_default || rowid_alias,
                    is_simple: true,
                    references,
                }
            })
            .collect();
        Ok(ViewSchema::new(columns))
    }

    /// Names of the temporary triggers currently installed on this connection.
    pub fn temp_triggers(&self) -> Result<Vec<String>> {
        let rows = self.query(
            "SELECT name FROM sqlite_temp_master WHERE type = 'trigger' ORDER BY name",
            &[],
        )?;
        Ok(rows
            .rows
            .into_iter()
            .filter_map(|r| r.into_iter().next().and_then(|v| v.as_text().map(str::to_string)))
            .collect())
    }

    /// Install a check trigger for `table`. It is removed when the returned
    /// guard drops.
    pub fn install_check(&self, table: &Ident, kind: DmlKind, check: &Expr) -> Result<CheckTrigger<'_>> {
        let db = self.lock();
        CheckTrigger::install(self, db, table, kind, check)
    }

    /// Insert `rows` into `table` in one statement. With a check, any row
    /// failing it aborts the whole insert.
    pub fn guarded_insert(
        &self,
        table: &Ident,
        columns: &[Ident],
        rows: &[Vec<SqlValue>],
        check: Option<&Expr>,
    ) -> Result<DmlOutcome> {
        if rows.is_empty() {
            return Ok(DmlOutcome::default());
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != columns.len()) {
            return Err(Error::ArityMismatch {
                expected: columns.len(),
                actual: bad.len(),
            });
        }
        let mut sql = format!("INSERT INTO {} (", quote_ident(table.as_str()));
        sql.push_str(
            &columns
                .iter()
                .map(|c| quote_ident(c.as_str()))
                .collect::<Vec<_>>()
                .join(", "),
        );
        sql.push_str(") VALUES ");
        let mut n = 0;
        for (i, row) in rows.iter().enumerate() {
            if i > 0 {
                sql.push_str(", ");
            }
            sql.push('(');
            for j in 0..row.len() {
                if j > 0 {
                    sql.push_str(", ");
                }
                n += 1;
                let _ = write!(sql, "?{n}");
            }
            sql.push(')');
        }
        let params: Vec<SqlValue> = rows.iter().flatten().cloned().collect();
        self.run_guarded(table, DmlKind::Insert, &sql, &params, check)
    }

    /// `UPDATE table SET ... WHERE scope` with statement-level check abort.
    pub fn guarded_update(
        &self,
        table: &Ident,
        assignments: &[Assignment],
        scope: Option<&Expr>,
        check: Option<&Expr>,
    ) -> Result<DmlOutcome> {
        let mut params = Vec::new();
        let mut sql = format!("UPDATE {} SET ", quote_ident(table.as_str()));
        for (i, a) in assignments.iter().enumerate() {
            if i > 0 {
                sql.push_str(", ");
            }
            sql.push_str(&quote_ident(a.column.as_str()));
            sql.push_str(" = ");
            write_expr(&a.value, &mut sql, &mut BindSink { params: &mut params });
        }
        if let Some(w) = scope {
            sql.push_str(" WHERE ");
            write_expr(w, &mut sql, &mut BindSink { params: &mut params });
        }
        self.run_guarded(table, DmlKind::Update, &sql, &params, check)
    }

    /// Delete rows matching `scope` (all rows when absent). No trigger.
    pub fn delete(&self, table: &Ident, scope: Option<&Expr>) -> Result<DmlOutcome> {
        let mut params = Vec::new();
        let mut sql = format!("DELETE FROM {}", quote_ident(table.as_str()));
        if let Some(w) = scope {
            sql.push_str(" WHERE ");
            write_expr(w, &mut sql, &mut BindSink { params: &mut params });
        }
        let affected_rows = self.execute(&sql, &params)?;
        Ok(DmlOutcome { affected_rows })
    }

    fn run_guarded(
        &self,
        table: &Ident,
        kind: DmlKind,
        sql: &str,
        params: &[SqlValue],
        check: Option<&Expr>,
    ) -> Result<DmlOutcome> {
        let db = self.lock();
        let check = check.filter(|_| self.check_enforcement());
        let Some(check) = check else {
            let affected_rows = self.execute_locked(&db, sql, params)?;
            return Ok(DmlOutcome { affected_rows });
        };
        let trigger = CheckTrigger::install(self, db, table, kind, check)?;
        let affected_rows = trigger.execute(sql, params)?;
        Ok(DmlOutcome { affected_rows })
    }
}

/// Emits `NEW."col"` and reads literals from the binding table.
struct TriggerSink {
    values: Vec<SqlValue>,
}

impl SqlSink for TriggerSink {
    fn column(&mut self, out: &mut String, column: &Ident) {
        out.push_str("NEW.");
        out.push_str(&quote_ident(column.as_str()));
    }

    fn literal(&mut self, out: &mut String, value: &SqlValue) {
        self.values.push(value.clone());
        let _ = write!(
            out,
            "(SELECT value FROM temp.capql_bindings WHERE slot = {})",
            self.values.len()
        );
    }
}

/// A temporary check trigger, live for as long as this guard. Holds the
/// connection for its lifetime.
pub struct CheckTrigger<'a> {
    conn: &'a Connection,
    db: MutexGuard<'a, rusqlite::Connection>,
    name: String,
    kind: DmlKind,
    clause: String,
}

impl<'a> CheckTrigger<'a> {
    fn install(
        conn: &'a Connection,
        db: MutexGuard<'a, rusqlite::Connection>,
        table: &Ident,
        kind: DmlKind,
        check: &Expr,
    ) -> Result<CheckTrigger<'a>> {
        let name = format!("{TRIGGER_PREFIX}{:016x}", rand::random::<u64>());
        let mut sink = TriggerSink { values: Vec::new() };
        let mut cond = String::new();
        write_expr(check, &mut cond, &mut sink);
        let timing = match kind {
            DmlKind::Insert => "AFTER INSERT",
            DmlKind::Update => "AFTER UPDATE",
            DmlKind::Delete => unreachable!("deletes install no check"),
        };
        let ddl = format!(
            "CREATE TEMP TRIGGER \"{name}\" {timing} ON {} FOR EACH ROW \
             WHEN NOT COALESCE({cond}, 0) BEGIN SELECT RAISE(ABORT, '{name}'); END",
            quote_ident(table.as_str())
        );
        let trigger = CheckTrigger {
            conn,
            db,
            name,
            kind,
            clause: check.to_string(),
        };
        if !sink.values.is_empty() {
            conn.count();
            trigger
                .db
                .execute_batch(
                    "CREATE TEMP TABLE IF NOT EXISTS capql_bindings(slot INTEGER PRIMARY KEY, value)",
                )
                .map_err(|e| Error::engine("CREATE TEMP TABLE capql_bindings", e))?;
            let mut sql = String::from("INSERT INTO temp.capql_bindings(slot, value) VALUES ");
            for i in 1..=sink.values.len() {
                if i > 1 {
                    sql.push_str(", ");
                }
                let _ = write!(sql, "({i}, ?{i})");
            }
            conn.execute_locked(&trigger.db, &sql, &sink.values)?;
        }
        conn.count();
        trigger
            .db
            .execute_batch(&ddl)
            .map_err(|e| Error::engine(ddl.clone(), e))?;
        Ok(trigger)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Run a statement while the trigger is installed, translating a check
    /// abort into [`Error::ViewConstraintViolation`].
    pub fn execute(&self, sql: &str, params: &[SqlValue]) -> Result<usize> {
        self.conn.execute_locked(&self.db, sql, params).map_err(|e| match &e {
            Error::Engine {
                source: rusqlite::Error::SqliteFailure(_, Some(msg)),
                ..
            } if msg.contains(&self.name) => Error::ViewConstraintViolation {
                op: self.kind,
                clause: self.clause.clone(),
            },
            _ => e,
        })
    }
}

impl Drop for CheckTrigger<'_> {
    fn drop(&mut self) {
        self.conn.count();
        let drop_sql = format!(
            "DROP TRIGGER IF EXISTS temp.\"{}\"; DELETE FROM temp.capql_bindings;",
            self.name
        );
        if self.db.execute_batch(&drop_sql).is_err() {
            // The binding table may not exist when the check had no literals.
            let _ = self
                .db
                .execute_batch(&format!("DROP TRIGGER IF EXISTS temp.\"{}\"", self.name));
        }
    }
}
