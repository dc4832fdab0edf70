//! Request streams over a generated library database.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use library::fixture::LIBRARY_DB;
use viewcap::{Connection, Result, RootAuthority, SqlValue, Validation};

use crate::report::BenchResult;
use crate::variants::Variant;

pub const CARDHOLDERS: i64 = 100;
pub const AUTHORS: i64 = 50;
pub const BOOKS: i64 = 500;
pub const RESERVATIONS: i64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    ReadWrite,
    ReadOnly,
    InsertOnly,
}

impl Kind {
    pub fn parse(s: &str) -> Option<Kind> {
        match s {
            "rw" => Some(Kind::ReadWrite),
            "ro" => Some(Kind::ReadOnly),
            "ins" => Some(Kind::InsertOnly),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Kind::ReadWrite => "rw",
            Kind::ReadOnly => "ro",
            Kind::InsertOnly => "ins",
        }
    }

    /// Request counts at one fifth of the full-size runs.
    pub fn default_count(self) -> usize {
        match self {
            Kind::ReadWrite => 300,
            Kind::ReadOnly => 150,
            Kind::InsertOnly => 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Request {
    Search { card: i64, author: i64 },
    MyReservations { card: i64 },
    Count { card: i64, book: i64 },
    Reserve { card: i64, book: i64 },
    Remove { card: i64, r_id: i64 },
}

pub fn author_name(i: i64) -> (String, String) {
    (format!("First{i}"), format!("Last{i}"))
}

/// The request stream; a pure function of its arguments. Read-write is
/// 40% author lookups, 30% reservations and 30% removals.
pub fn generate(kind: Kind, count: usize, seed: u64) -> Vec<Request> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next_r_id = RESERVATIONS + 1;
    (0..count)
        .map(|_| {
            let card = rng.gen_range(1..=CARDHOLDERS);
            let roll = rng.gen_range(0..100);
            let req = match kind {
                Kind::ReadWrite if roll < 40 => Request::Search {
                    card,
                    author: rng.gen_range(1..=AUTHORS),
                },
                Kind::ReadWrite if roll < 70 => Request::Reserve {
                    card,
                    book: rng.gen_range(1..=BOOKS),
                },
                Kind::ReadWrite => Request::Remove {
                    card,
                    r_id: rng.gen_range(1..next_r_id),
                },
                Kind::ReadOnly if roll < 34 => Request::Search {
                    card,
                    author: rng.gen_range(1..=AUTHORS),
                },
                Kind::ReadOnly if roll < 67 => Request::MyReservations { card },
                Kind::ReadOnly => Request::Count {
                    card,
                    book: rng.gen_range(1..=BOOKS),
                },
                Kind::InsertOnly => Request::Reserve {
                    card,
                    book: rng.gen_range(1..=BOOKS),
                },
            };
            if matches!(req, Request::Reserve { .. }) {
                next_r_id += 1;
            }
            req
        })
        .collect()
}

/// Writes the generated library to `dir/library.db`.
pub fn create_db(dir: &Path, seed: u64) -> Result<std::path::PathBuf> {
    let path = dir.join(LIBRARY_DB);
    let _ = std::fs::remove_file(&path);
    let conn = Connection::create(&path)?;
    let schema: String = library::fixture::LIBRARY_SQL
        .split(';')
        .filter(|s| s.contains("CREATE TABLE"))
        .map(|s| format!("{s};"))
        .collect();
    conn.execute_batch(&schema)?;
    conn.execute_batch("CREATE INDEX books_author ON books(author); CREATE INDEX reservations_holder ON reservations(cardholder_id); CREATE INDEX reservations_book ON reservations(book); BEGIN")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    for c in 1..=CARDHOLDERS {
        conn.execute(
            "INSERT INTO cardholders VALUES (?1, ?2, ?3)",
            &[c.into(), format!("Holder{c}").into(), format!("Card{c}").into()],
        )?;
    }
    for a in 1..=AUTHORS {
        let (f, l) = author_name(a);
        conn.execute("INSERT INTO authors VALUES (?1, ?2, ?3)", &[a.into(), f.into(), l.into()])?;
    }
    for b in 1..=BOOKS {
        let params: [SqlValue; 4] = [
            b.into(),
            rng.gen_range(1..=AUTHORS).into(),
            format!("Title {b}").into(),
            rng.gen_range(1..=10i64).into(),
        ];
        conn.execute("INSERT INTO books VALUES (?1, ?2, ?3, ?4)", &params)?;
    }
    for r in 1..=RESERVATIONS {
        let params: [SqlValue; 3] = [r.into(), rng.gen_range(1..=BOOKS).into(), rng.gen_range(1..=CARDHOLDERS).into()];
        conn.execute("INSERT INTO reservations VALUES (?1, ?2, ?3)", &params)?;
    }
    conn.execute_batch("COMMIT")?;
    Ok(path)
}

pub fn execute(variant: &dyn Variant, auth: &RootAuthority, req: &Request) -> Result<()> {
    let s = variant.service();
    match req {
        Request::Search { card, author } => {
            let (f, l) = author_name(*author);
            s.search_author(auth, *card, &f, &l).map(drop)
        }
        Request::MyReservations { card } => s.my_reservations(auth, *card).map(drop),
        Request::Count { card, book } => s.num_reservations(auth, *card, &book.to_string()).map(drop),
        Request::Reserve { card, book } => s.reserve(auth, *card, &book.to_string()).map(drop),
        Request::Remove { card, r_id } => s.remove_reservation(auth, *card, &r_id.to_string()).map(drop),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct WorkloadSpec {
    pub kind: Kind,
    pub count: usize,
    pub seed: u64,
}

/// Runs the stream once on a fresh database; returns elapsed milliseconds
/// and the authority, for inspecting the final state.
pub fn run_once(spec: WorkloadSpec, variant: &dyn Variant, dir: &Path, validation: Validation) -> Result<(f64, RootAuthority)> {
    let requests = generate(spec.kind, spec.count, spec.seed);
    let path = create_db(dir, spec.seed)?;
    let auth = library::fixture::authority(&path);
    let conn = auth.connection(LIBRARY_DB)?;
    conn.set_validation(validation);
    variant.configure(&conn);
    conn.query("SELECT COUNT(*) FROM reservations", &[])?;
    let start = Instant::now();
    for req in &requests {
        execute(variant, &auth, req)?;
    }
    Ok((start.elapsed().as_secs_f64() * 1e3, auth))
}

pub fn run_workload(spec: WorkloadSpec, variant: &dyn Variant, reps: usize, validation: Validation) -> Result<BenchResult> {
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let dir = tempfile::tempdir().map_err(|e| viewcap::Error::Io(e.to_string()))?;
        samples.push(run_once(spec, variant, dir.path(), validation)?.0);
    }
    Ok(BenchResult::new(variant.name(), spec.kind.label(), None, &samples))
}

/// Runs each variant in turn within every repetition, so drift in machine
/// load spreads evenly over the variants.
pub fn run_interleaved(
    spec: WorkloadSpec,
    variants: &[&dyn Variant],
    reps: usize,
    validation: Validation,
) -> Result<Vec<BenchResult>> {
    let mut samples = vec![Vec::with_capacity(reps); variants.len()];
    for rep in 0..reps {
        for k in 0..variants.len() {
            let i = (k + rep) % variants.len();
            let dir = tempfile::tempdir().map_err(|e| viewcap::Error::Io(e.to_string()))?;
            samples[i].push(run_once(spec, variants[i], dir.path(), validation)?.0);
        }
    }
    Ok(variants
        .iter()
        .zip(samples)
        .map(|(v, s)| BenchResult::new(v.name(), spec.kind.label(), None, &s))
        .collect())
}
