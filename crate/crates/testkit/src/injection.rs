//! Hostile values substituted into `sqlformat` templates.

use viewcap::sql::SqlValue;
use viewcap::{sqlformat, Connection, ViewValue};

pub const PAYLOADS: [&str; 50] = [
    "' OR '1'='1",
    "' OR 1=1 --",
    "' OR 1=1; --",
    "'; DROP TABLE students; --",
    "\"; DROP TABLE students; --",
    "x'); DELETE FROM students; --",
    "' UNION SELECT * FROM students --",
    "' UNION ALL SELECT name, email, gpa, id FROM students --",
    "1; UPDATE students SET gpa = 4.0",
    "1 OR 1=1",
    "0) OR (1=1",
    "') OR ('a'='a",
    "'' OR ''=''",
    "'''",
    "''",
    "'",
    "\\' OR 1=1 --",
    "%' OR name LIKE '%",
    "' AND 1=0 UNION SELECT sqlite_version() --",
    "' OR gpa > 0 --",
    "Jerome Seinfeld' OR advisor <> '",
    "Jerome Seinfeld'--",
    "Jerome Seinfeld' /*",
    "*/ OR 1=1 /*",
    "/* comment */ 1=1",
    "-- comment",
    "\n OR 1=1",
    "\r\n; DROP TABLE advising",
    "\0' OR 1=1",
    "' OR id IS NOT NULL --",
    "' OR NOT 0 --",
    "' || (SELECT email FROM students LIMIT 1) || '",
    "' AND (SELECT COUNT(*) FROM students) > 0 --",
    "1 = 1",
    "$1",
    "?",
    "?1",
    ":name",
    "@p",
    "' OR 'x' = 'x' COLLATE NOCASE --",
    "'; ATTACH DATABASE '/tmp/x.db' AS x; --",
    "'; PRAGMA writable_schema = 1; --",
    "'; CREATE TRIGGER t AFTER INSERT ON students BEGIN DELETE FROM students; END; --",
    "ʼ OR 1=1 --",
    "＇ OR 1=1 --",
    "' OR 1=1 LIMIT 1 OFFSET 0 --",
    "\") OR (\"1\"=\"1",
    "' OR \"name\" = \"name\" --",
    "x' AND 0 UNION SELECT NULL, NULL, NULL, NULL --",
    "🙂' OR '🙂'='🙂",
];

/// Substitutes every payload into `template` and checks that the parsed
/// expression has the shape of a benign substitution, that filtering
/// `view` by it matches no rows, and that `conn`'s tables are unchanged.
pub fn check_payloads(template: &str, view: &ViewValue, conn: &Connection) -> Result<usize, String> {
    let snapshot = |c: &Connection| {
        c.query(
            "SELECT name, sql FROM sqlite_master ORDER BY name",
            &[],
        )
        .map(|r| format!("{:?}", r.rows))
        .map_err(|e| e.to_string())
    };
    let contents = |c: &Connection| -> Result<String, String> {
        let mut out = String::new();
        for t in ["students", "advising"] {
            let r = c
                .query(&format!("SELECT * FROM {t} ORDER BY rowid"), &[])
                .map_err(|e| e.to_string())?;
            out.push_str(&format!("{:?}", r.rows));
        }
        Ok(out)
    };
    let schema_before = snapshot(conn)?;
    let data_before = contents(conn)?;
    let benign = sqlformat(template, &[SqlValue::Text("benign".into())]).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for p in PAYLOADS {
        let e = sqlformat(template, &[SqlValue::Text(p.into())]).map_err(|e| format!("{p:?}: {e}"))?;
        if !e.same_shape(&benign) {
            return Err(format!("payload {p:?} changed the expression to {e:?}"));
        }
        let rows = view
            .filter(e)
            .and_then(|v| v.fetch())
            .map_err(|e| format!("{p:?}: {e}"))?;
        if !rows.is_empty() {
            return Err(format!("payload {p:?} matched {} rows", rows.len()));
        }
        checked += 1;
    }
    if snapshot(conn)? != schema_before || contents(conn)? != data_before {
        return Err("payloads modified the database".into());
    }
    Ok(checked)
}
