//! Interchangeable implementations of the five endpoints, selected by name.

use viewcap::{with_user, Connection, Result, RootAuthority, SqlValue, Value, ViewValue};

use crate::endpoints::{self, key, Contracted};
use crate::fixture::LIBRARY_DB;

/// The endpoint surface. `auth` is the per-request authority; `card` is
/// the already-authenticated cardholder.
pub trait Service: Send + Sync {
    fn name(&self) -> &'static str;
    fn reserve(&self, auth: &RootAuthority, card: i64, book_id: &str) -> Result<usize>;
    fn my_reservations(&self, auth: &RootAuthority, card: i64) -> Result<String>;
    fn remove_reservation(&self, auth: &RootAuthority, card: i64, r_id: &str) -> Result<usize>;
    fn search_author(&self, auth: &RootAuthority, card: i64, fname: &str, lname: &str) -> Result<String>;
    fn num_reservations(&self, auth: &RootAuthority, card: i64, book_id: &str) -> Result<String>;
}

/// The card id of the cardholder named `First Last`.
pub fn card_id(auth: &RootAuthority, name: &str) -> Result<Option<i64>> {
    let rows = auth.connection(LIBRARY_DB)?.query(
        "SELECT card_id FROM cardholders WHERE firstname || ' ' || lastname = ?1",
        &[name.into()],
    )?;
    Ok(rows.rows.first().and_then(|r| r[0].as_i64()))
}

fn view(auth: &RootAuthority, table: &str) -> Result<ViewValue> {
    auth.make_view(LIBRARY_DB, table)
}

fn mine(v: ViewValue, card: i64) -> Result<ViewValue> {
    v.filter(viewcap::sqlformat("cardholder_id = $1", &[card.into()])?)
}

fn as_count(v: Value) -> usize {
    match v {
        Value::Integer(n) => n as usize,
        _ => 0,
    }
}

fn as_text(v: Value) -> String {
    v.as_text().unwrap_or_default().to_string()
}

/// Every endpoint is a contracted function; bodies never mention the user.
pub struct ContractedService {
    fns: Contracted,
}

impl ContractedService {
    pub fn new() -> Result<ContractedService> {
        Ok(ContractedService { fns: Contracted::new()? })
    }

    pub fn functions(&self) -> &Contracted {
        &self.fns
    }
}

impl Service for ContractedService {
    fn name(&self) -> &'static str {
        "contracts"
    }

    fn reserve(&self, auth: &RootAuthority, card: i64, book_id: &str) -> Result<usize> {
        let args = vec![book_id.into(), view(auth, "reservations")?.into()];
        with_user(card.to_string(), || self.fns.reserve.call(args)).map(as_count)
    }

    fn my_reservations(&self, auth: &RootAuthority, card: i64) -> Result<String> {
        let args = vec![
            view(auth, "reservations")?.into(),
            view(auth, "books")?.into(),
            view(auth, "authors")?.into(),
        ];
        with_user(card.to_string(), || self.fns.my_reservations.call(args)).map(as_text)
    }

    fn remove_reservation(&self, auth: &RootAuthority, card: i64, r_id: &str) -> Result<usize> {
        let args = vec![r_id.into(), view(auth, "reservations")?.into()];
        with_user(card.to_string(), || self.fns.remove_reservation.call(args)).map(as_count)
    }

    fn search_author(&self, auth: &RootAuthority, card: i64, fname: &str, lname: &str) -> Result<String> {
        let args = vec![
            fname.into(),
            lname.into(),
            view(auth, "authors")?.into(),
            view(auth, "books")?.into(),
        ];
        with_user(card.to_string(), || self.fns.search_author.call(args)).map(as_text)
    }

    fn num_reservations(&self, auth: &RootAuthority, card: i64, book_id: &str) -> Result<String> {
        let args = vec![book_id.into(), view(auth, "reservations")?.into()];
        with_user(card.to_string(), || self.fns.num_reservations.call(args)).map(as_text)
    }
}

/// The same bodies over raw capabilities, with the user restriction
/// applied by the entry code instead of a contract.
pub struct CapabilityService;

impl Service for CapabilityService {
    fn name(&self) -> &'static str {
        "capabilities"
    }

    fn reserve(&self, auth: &RootAuthority, card: i64, book_id: &str) -> Result<usize> {
        let v = mine(view(auth, "reservations")?, card)?;
        with_user(card.to_string(), || endpoints::reserve_body(book_id, &v))
    }

    fn my_reservations(&self, auth: &RootAuthority, card: i64) -> Result<String> {
        endpoints::my_reservations_body(
            &mine(view(auth, "reservations")?, card)?,
            &view(auth, "books")?,
            &view(auth, "authors")?,
        )
    }

    fn remove_reservation(&self, auth: &RootAuthority, card: i64, r_id: &str) -> Result<usize> {
        endpoints::remove_reservation_body(r_id, &mine(view(auth, "reservations")?, card)?)
    }

    fn search_author(&self, auth: &RootAuthority, _card: i64, fname: &str, lname: &str) -> Result<String> {
        endpoints::search_author_body(fname, lname, &view(auth, "authors")?, &view(auth, "books")?)
    }

    fn num_reservations(&self, auth: &RootAuthority, _card: i64, book_id: &str) -> Result<String> {
        endpoints::num_reservations_body(book_id, &view(auth, "reservations")?)
    }
}

/// Hand-written SQL with the policy hard-coded. Serves as the reference
/// for the policy suite and as the performance baseline.
pub struct DirectSql;

impl DirectSql {
    fn conn(auth: &RootAuthority) -> Result<Connection> {
        auth.connection(LIBRARY_DB)
    }

    fn lines(conn: &Connection, sql: &str, params: &[SqlValue], f: impl Fn(&[SqlValue]) -> String) -> Result<String> {
        let rows = conn.query(sql, params)?;
        Ok(rows.rows.iter().map(|r| f(r)).collect::<Vec<_>>().join("\n"))
    }
}

fn text(v: &SqlValue) -> &str {
    v.as_text().unwrap_or_default()
}

impl Service for DirectSql {
    fn name(&self) -> &'static str {
        "direct-sql"
    }

    fn reserve(&self, auth: &RootAuthority, card: i64, book_id: &str) -> Result<usize> {
        Self::conn(auth)?.execute(
            "INSERT INTO reservations (book, cardholder_id) VALUES (?1, ?2)",
            &[key(book_id), card.into()],
        )
    }

    fn my_reservations(&self, auth: &RootAuthority, card: i64) -> Result<String> {
        Self::lines(
            &Self::conn(auth)?,
            "SELECT title, firstname, lastname FROM reservations \
             JOIN books ON book = book_id JOIN authors ON author = author_id \
             WHERE cardholder_id = ?1 ORDER BY r_id",
            &[card.into()],
            |r| format!("{} by {} {}", text(&r[0]), text(&r[1]), text(&r[2])),
        )
    }

    fn remove_reservation(&self, auth: &RootAuthority, card: i64, r_id: &str) -> Result<usize> {
        Self::conn(auth)?.execute(
            "DELETE FROM reservations WHERE r_id = ?1 AND cardholder_id = ?2",
            &[key(r_id), card.into()],
        )
    }

    fn search_author(&self, auth: &RootAuthority, _card: i64, fname: &str, lname: &str) -> Result<String> {
        Self::lines(
            &Self::conn(auth)?,
            "SELECT title FROM authors JOIN books ON author_id = author \
             WHERE firstname = ?1 AND lastname = ?2 ORDER BY book_id",
            &[fname.into(), lname.into()],
            |r| text(&r[0]).to_string(),
        )
    }

    fn num_reservations(&self, auth: &RootAuthority, _card: i64, book_id: &str) -> Result<String> {
        let rows = Self::conn(auth)?.query("SELECT COUNT(*) FROM reservations WHERE book = ?1", &[key(book_id)])?;
        Ok(rows.rows[0][0].as_i64().unwrap_or(0).to_string())
    }
}

type Constructor = fn() -> Result<Box<dyn Service>>;

/// Named constructors for every implementation.
pub const REGISTRY: [(&str, Constructor); 3] = [
    ("direct-sql", || Ok(Box::new(DirectSql))),
    ("capabilities", || Ok(Box::new(CapabilityService))),
    ("contracts", || Ok(Box::new(ContractedService::new()?))),
];

pub fn by_name(name: &str) -> Option<Result<Box<dyn Service>>> {
    REGISTRY.iter().find(|(n, _)| *n == name).map(|(_, make)| make())
}
