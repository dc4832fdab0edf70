//! Endpoint bodies and their contracts. A body sees only the views it is
//! handed; whatever policy it obeys comes from those views.

use viewcap::{
    current_user, define_contracted, sqlformat, ArgContract, ContractedFn, FunctionContract, Modifier,
    Privilege::*, Result, RowSet, SqlValue, Value, ViewContract, ViewValue,
};

pub const COMPONENT: &str = "library";

/// Integer-looking text binds as an integer so it meets integer keys.
pub fn key(text: &str) -> SqlValue {
    text.trim()
        .parse::<i64>()
        .map(SqlValue::Integer)
        .unwrap_or_else(|_| SqlValue::Text(text.to_string()))
}

fn user() -> Result<SqlValue> {
    Ok(key(&current_user()?))
}

fn text(row: &[SqlValue], i: usize) -> String {
    match &row[i] {
        SqlValue::Text(s) => s.clone(),
        other => format!("{other:?}"),
    }
}

fn sorted(mut rows: RowSet) -> Vec<Vec<SqlValue>> {
    rows.rows.sort_by_key(|r| r[0].as_i64());
    rows.rows
}

pub fn reserve_body(book_id: &str, reservations: &ViewValue) -> Result<usize> {
    reservations.insert(&["book", "cardholder_id"], vec![vec![key(book_id), user()?]])
}

/// One line per reservation, `<title> by <first> <last>`, in reservation order.
pub fn my_reservations_body(reservations: &ViewValue, books: &ViewValue, authors: &ViewValue) -> Result<String> {
    let rows = reservations
        .join(books, Some("book = book_id"))?
        .join(authors, Some("author = author_id"))?
        .select("r_id, cardholder_id, title, firstname, lastname")?
        .fetch()?;
    let lines: Vec<String> = sorted(rows)
        .iter()
        .map(|r| format!("{} by {} {}", text(r, 2), text(r, 3), text(r, 4)))
        .collect();
    Ok(lines.join("\n"))
}

pub fn remove_reservation_body(r_id: &str, reservations: &ViewValue) -> Result<usize> {
    reservations
        .filter(sqlformat("r_id = $1", &[key(r_id)])?)?
        .delete(None)
}

/// Titles by the named author, one per line, in book order.
pub fn search_author_body(fname: &str, lname: &str, authors: &ViewValue, books: &ViewValue) -> Result<String> {
    let rows = authors
        .filter(sqlformat("firstname = $1 AND lastname = $2", &[fname.into(), lname.into()])?)?
        .join(books, Some("author_id = author"))?
        .select("book_id, title")?
        .fetch()?;
    let titles: Vec<String> = sorted(rows).iter().map(|r| text(r, 1)).collect();
    Ok(titles.join("\n"))
}

pub fn num_reservations_body(book_id: &str, reservations: &ViewValue) -> Result<String> {
    let rows = reservations
        .filter(sqlformat("book = $1", &[key(book_id)])?)?
        .aggregate("COUNT(*)")?
        .fetch()?;
    Ok(match rows.rows.first().and_then(|r| r.first()) {
        Some(SqlValue::Integer(n)) => n.to_string(),
        _ => "0".to_string(),
    })
}

fn restrict_to_current_user() -> Modifier {
    Modifier::restrict(|v| v.filter(sqlformat("cardholder_id = $1", &[user()?])?))
}

pub fn reserve_contract() -> FunctionContract {
    FunctionContract::new(
        vec![
            ArgContract::String,
            ArgContract::view(ViewContract::new().grant_with(Insert, vec![restrict_to_current_user()])),
        ],
        ArgContract::Any,
    )
}

pub fn my_reservations_contract() -> FunctionContract {
    let reservations = ViewContract::new()
        .grant_with(Fetch, vec![restrict_to_current_user()])
        .grant(Join)
        .grant(Where)
        .grant(Select);
    let lookup = ViewContract::permitting(&[Join, Fetch, Select, Where]);
    FunctionContract::new(
        vec![
            ArgContract::view(reservations),
            ArgContract::view(lookup.clone()),
            ArgContract::view(lookup),
        ],
        ArgContract::String,
    )
}

pub fn remove_reservation_contract() -> FunctionContract {
    FunctionContract::new(
        vec![
            ArgContract::String,
            ArgContract::view(
                ViewContract::new()
                    .grant(Where)
                    .grant_with(Delete, vec![restrict_to_current_user()]),
            ),
        ],
        ArgContract::Any,
    )
}

pub fn search_author_contract() -> FunctionContract {
    let read = ViewContract::permitting(&[Fetch, Join, Select, Where]);
    FunctionContract::new(
        vec![
            ArgContract::String,
            ArgContract::String,
            ArgContract::view(read.clone()),
            ArgContract::view(read),
        ],
        ArgContract::String,
    )
}

pub fn num_reservations_contract() -> FunctionContract {
    FunctionContract::new(
        vec![
            ArgContract::String,
            ArgContract::view(
                ViewContract::new()
                    .grant_with(Aggregate, vec![Modifier::with(ViewContract::permitting(&[Fetch]))])
                    .grant(Where),
            ),
        ],
        ArgContract::String,
    )
}

fn arg_text(v: &Value) -> &str {
    v.as_text().unwrap_or_default()
}

fn arg_view(v: &Value) -> &ViewValue {
    v.as_view().expect("checked by the argument contract")
}

/// The five endpoints as contracted functions.
pub struct Contracted {
    pub reserve: ContractedFn,
    pub my_reservations: ContractedFn,
    pub remove_reservation: ContractedFn,
    pub search_author: ContractedFn,
    pub num_reservations: ContractedFn,
}

impl Contracted {
    pub fn new() -> Result<Contracted> {
        Ok(Contracted {
            reserve: define_contracted(COMPONENT, "reserve", reserve_contract(), |a| {
                Ok(Value::Integer(reserve_body(arg_text(&a[0]), arg_view(&a[1]))? as i64))
            })?,
            my_reservations: define_contracted(COMPONENT, "my-reservations", my_reservations_contract(), |a| {
                my_reservations_body(arg_view(&a[0]), arg_view(&a[1]), arg_view(&a[2])).map(Value::from)
            })?,
            remove_reservation: define_contracted(
                COMPONENT,
                "remove-reservation",
                remove_reservation_contract(),
                |a| Ok(Value::Integer(remove_reservation_body(arg_text(&a[0]), arg_view(&a[1]))? as i64)),
            )?,
            search_author: define_contracted(COMPONENT, "search-author", search_author_contract(), |a| {
                search_author_body(arg_text(&a[0]), arg_text(&a[1]), arg_view(&a[2]), arg_view(&a[3]))
                    .map(Value::from)
            })?,
            num_reservations: define_contracted(COMPONENT, "num-reservations", num_reservations_contract(), |a| {
                num_reservations_body(arg_text(&a[0]), arg_view(&a[1])).map(Value::from)
            })?,
        })
    }
}
