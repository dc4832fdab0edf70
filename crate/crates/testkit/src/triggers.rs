//! Randomized guarded writes, many of them failing, after which no check
//! trigger may remain installed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use viewcap::{Error, SqlValue};

use crate::{students, STUDENTS_DB};

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Hygiene {
    pub succeeded: usize,
    pub rejected: usize,
    pub engine_errors: usize,
}

/// Runs `n` guarded writes against the students fixture. Fails at the first
/// write that leaves a temporary trigger behind.
pub fn trigger_hygiene(n: usize, seed: u64) -> Result<Hygiene, String> {
    let (auth, conn) = students();
    let s = auth.make_view(STUDENTS_DB, "students").map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Hygiene::default();
    for i in 0..n {
        let bound = rng.gen_range(0..=40) as f64 / 10.0;
        let v = s.filter(format!("gpa >= {bound:.1}").as_str()).map_err(|e| e.to_string())?;
        let gpa = rng.gen_range(0..=40) as f64 / 10.0;
        let result = match rng.gen_range(0..5) {
            0 => v.update(format!("gpa = {gpa:.1}").as_str(), None),
            1 => v.update(format!("gpa = gpa - {gpa:.1}").as_str(), Some("id < 3")),
            2 => v.insert(
                &["name", "email", "gpa"],
                vec![vec![format!("s{i}").into(), "x@college.edu".into(), gpa.into()]],
            ),
            // NOT NULL failures raised by the engine, not by the check.
            3 => v.update("name = NULL", None),
            _ => v.insert(
                &["name", "email", "gpa"],
                vec![
                    vec![format!("t{i}").into(), "y@college.edu".into(), gpa.into()],
                    vec![SqlValue::Null, "z@college.edu".into(), gpa.into()],
                ],
            ),
        };
        match result {
            Ok(_) => out.succeeded += 1,
            Err(Error::ViewConstraintViolation { .. }) => out.rejected += 1,
            Err(Error::Engine { .. }) => out.engine_errors += 1,
            Err(e) => return Err(format!("write {i}: unexpected error {e}")),
        }
        let left = conn.temp_triggers().map_err(|e| e.to_string())?;
        if !left.is_empty() {
            return Err(format!("write {i}: triggers left behind: {left:?}"));
        }
        if conn.query("SELECT COUNT(*) FROM students", &[]).map_err(|e| e.to_string())?.len() != 1 {
            return Err(format!("write {i}: students unreadable"));
        }
        // Keep the table small so every predicate stays reachable.
        conn.execute("DELETE FROM students WHERE id > 3", &[]).map_err(|e| e.to_string())?;
    }
    Ok(out)
}

/// While a check trigger is installed on one connection, a second
/// connection to the same file inserts a row the check would reject.
pub fn concurrent_insert(dir: &std::path::Path) -> Result<(), String> {
    use viewcap::sql::{parse_predicate, Ident};
    use viewcap::{Connection, DmlKind};

    let path = crate::students_file(dir);
    let a = Connection::open(&path).map_err(|e| e.to_string())?;
    let check = parse_predicate("gpa <= 2.5").map_err(|e| e.to_string())?;
    let trigger = a
        .install_check(&Ident::new("students"), DmlKind::Insert, &check)
        .map_err(|e| e.to_string())?;
    let blocked = trigger.execute(
        "INSERT INTO students (name, email, gpa) VALUES ('A', 'a@college.edu', 3.9)",
        &[],
    );
    if !matches!(blocked, Err(Error::ViewConstraintViolation { .. })) {
        return Err(format!("guarded connection accepted a violating insert: {blocked:?}"));
    }
    let other = path.clone();
    let inserted = std::thread::spawn(move || -> Result<usize, String> {
        let b = Connection::open(&other).map_err(|e| e.to_string())?;
        if !b.temp_triggers().map_err(|e| e.to_string())?.is_empty() {
            return Err("temporary trigger visible to another connection".into());
        }
        b.execute(
            "INSERT INTO students (name, email, gpa) VALUES ('Maria Bamford', 'mb@college.edu', 3.9)",
            &[],
        )
        .map_err(|e| e.to_string())
    })
    .join()
    .map_err(|_| "second connection panicked".to_string())??;
    if inserted != 1 {
        return Err(format!("second connection inserted {inserted} rows"));
    }
    drop(trigger);
    if !a.temp_triggers().map_err(|e| e.to_string())?.is_empty() {
        return Err("trigger survived its guard".into());
    }
    let n = a
        .query("SELECT id FROM students WHERE name = 'Maria Bamford'", &[])
        .map_err(|e| e.to_string())?
        .len();
    if n != 1 {
        return Err(format!("inserted row seen {n} times"));
    }
    Ok(())
}
