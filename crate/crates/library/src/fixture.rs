//! The reservation schema and its seed rows.

use std::path::{Path, PathBuf};

use viewcap::{Connection, Result, RootAuthority};

pub const LIBRARY_DB: &str = "library.db";

pub const LIBRARY_SQL: &str = "
CREATE TABLE cardholders (
    card_id INTEGER PRIMARY KEY,
    firstname TEXT NOT NULL,
    lastname TEXT NOT NULL
);
CREATE TABLE authors (
    author_id INTEGER PRIMARY KEY,
    firstname TEXT NOT NULL,
    lastname TEXT NOT NULL
);
CREATE TABLE books (
    book_id INTEGER PRIMARY KEY,
    author INTEGER NOT NULL REFERENCES authors(author_id),
    title TEXT NOT NULL,
    copies INTEGER NOT NULL
);
CREATE TABLE reservations (
    r_id INTEGER PRIMARY KEY,
    book INTEGER NOT NULL REFERENCES books(book_id),
    cardholder_id INTEGER NOT NULL REFERENCES cardholders(card_id)
);
INSERT INTO cardholders VALUES (1, 'Steve', 'Martin'), (2, 'Richard', 'Pryor');
INSERT INTO authors VALUES (1, 'Trevor', 'Noah'), (2, 'Tina', 'Fey');
INSERT INTO books VALUES (1, 1, 'Born a Crime', 4), (2, 2, 'Bossypants', 6);
INSERT INTO reservations VALUES (1, 2, 2), (2, 1, 2);
";

/// Writes the seeded schema to `dir/library.db`, replacing any existing file.
pub fn create(dir: &Path) -> Result<PathBuf> {
    let path = dir.join(LIBRARY_DB);
    if path.exists() {
        std::fs::remove_file(&path).map_err(|e| viewcap::Error::Io(format!("{}: {e}", path.display())))?;
    }
    Connection::create(&path)?.execute_batch(LIBRARY_SQL)?;
    Ok(path)
}

/// An authority over a seeded file database.
pub fn authority(path: &Path) -> RootAuthority {
    RootAuthority::new([(LIBRARY_DB.to_string(), path.to_path_buf())])
}

/// An authority over a seeded in-memory database.
pub fn in_memory() -> Result<RootAuthority> {
    let conn = Connection::open_in_memory()?;
    conn.execute_batch(LIBRARY_SQL)?;
    Ok(RootAuthority::with_connection(LIBRARY_DB, conn))
}
