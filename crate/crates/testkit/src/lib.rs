//! Test support for viewcap: the students/advising fixture, a brute-force
//! evaluator, and seeded random views.

pub mod cases;
pub mod gen;
pub mod injection;
pub mod oracle;
pub mod triggers;

use std::path::Path;

use viewcap::{Connection, Result, RootAuthority, RowSet, SqlValue, ViewValue};

pub const STUDENTS_DB: &str = "database.db";

pub const STUDENTS_SQL: &str = "
CREATE TABLE students (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    email TEXT NOT NULL,
    gpa REAL NOT NULL
);
CREATE TABLE advising (
    student INTEGER NOT NULL,
    advisor TEXT NOT NULL
);
INSERT INTO students VALUES
    (1, 'Mike Birbiglia', 'birbigms@college.edu', 2.5),
    (2, 'Tig Notaro', 'tnotaro@college.edu', 3.9),
    (3, 'Patton Oswalt', 'poswalt@college.edu', 3.4);
INSERT INTO advising VALUES
    (1, 'Jerome Seinfeld'),
    (2, 'Jerome Seinfeld'),
    (3, 'Joan Rivers');
";

/// The three students and their advisors, in memory.
pub fn students() -> (RootAuthority, Connection) {
    let conn = Connection::open_in_memory().expect("memory db");
    conn.execute_batch(STUDENTS_SQL).expect("fixture");
    (RootAuthority::with_connection(STUDENTS_DB, conn.clone()), conn)
}

/// The same fixture written to a file, for tests needing two connections.
pub fn students_file(dir: &Path) -> std::path::PathBuf {
    let path = dir.join(STUDENTS_DB);
    let conn = Connection::create(&path).expect("create db");
    conn.execute_batch(STUDENTS_SQL).expect("fixture");
    path
}

/// Names, emails and grades of the current user's advisees.
pub fn grades_for_advisees(students: &ViewValue, advising: &ViewValue) -> Result<RowSet> {
    let joined = students.join(advising, Some("id = student"))?;
    let mine = joined.filter(viewcap::sqlformat("advisor = $1", &[viewcap::current_user()?.into()])?)?;
    mine.select("name, email, gpa")?.fetch()
}

/// Rows as (text, text, real) triples, sorted.
pub fn triples(rows: &RowSet) -> Vec<(String, String, f64)> {
    let mut out: Vec<_> = rows
        .rows
        .iter()
        .map(|r| match r.as_slice() {
            [SqlValue::Text(a), SqlValue::Text(b), SqlValue::Real(c)] => (a.clone(), b.clone(), *c),
            other => panic!("unexpected row {other:?}"),
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}
