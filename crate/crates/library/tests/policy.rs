use library::endpoints::{self, Contracted};
use library::fixture;
use library::service::{CapabilityService, ContractedService, DirectSql, Service};
use viewcap::{with_user, Error, Privilege, RootAuthority, Value};

const CARDS: [i64; 3] = [1, 2, 3];
const IDS: [&str; 4] = ["1", "2", "3", "x"];
const AUTHORS: [(&str, &str); 4] = [("Trevor", "Noah"), ("Tina", "Fey"), ("Steve", "Martin"), ("Tina", "Noah")];

fn snapshot(auth: &RootAuthority) -> String {
    let conn = auth.connection(fixture::LIBRARY_DB).unwrap();
    ["cardholders", "authors", "books", "reservations"]
        .iter()
        .map(|t| format!("{:?}", conn.query(&format!("SELECT * FROM {t} ORDER BY rowid"), &[]).unwrap().rows))
        .collect()
}

type Outcome = (Result<String, String>, String);

/// Runs one request against a fresh seeded database and returns its
/// output (errors reduced to their kind) and the final tables.
fn run(svc: &dyn Service, request: &dyn Fn(&dyn Service, &RootAuthority) -> viewcap::Result<String>) -> Outcome {
    let auth = fixture::in_memory().unwrap();
    let out = request(svc, &auth).map_err(|e| match e {
        Error::Contract(_) | Error::ViewConstraintViolation { .. } => "forbidden".to_string(),
        Error::Engine { .. } => "engine".to_string(),
        other => format!("{other}"),
    });
    (out, snapshot(&auth))
}

type Request = Box<dyn Fn(&dyn Service, &RootAuthority) -> viewcap::Result<String>>;

fn grid() -> Vec<(String, Request)> {
    let mut out: Vec<(String, Request)> = Vec::new();
    for card in CARDS {
        out.push((format!("my_reservations {card}"), Box::new(move |s, a| s.my_reservations(a, card))));
        for id in IDS {
            out.push((
                format!("reserve {card} {id}"),
                Box::new(move |s, a| s.reserve(a, card, id).map(|n| n.to_string())),
            ));
            out.push((
                format!("remove {card} {id}"),
                Box::new(move |s, a| s.remove_reservation(a, card, id).map(|n| n.to_string())),
            ));
            out.push((format!("count {card} {id}"), Box::new(move |s, a| s.num_reservations(a, card, id))));
        }
        for (f, l) in AUTHORS {
            out.push((format!("search {card} {f} {l}"), Box::new(move |s, a| s.search_author(a, card, f, l))));
        }
    }
    out
}

#[test]
fn every_implementation_matches_the_reference_policy() {
    let reference = DirectSql;
    let contracted = ContractedService::new().unwrap();
    let candidates: [&dyn Service; 2] = [&contracted, &CapabilityService];
    let cases = grid();
    assert_eq!(cases.len(), 3 * (1 + 4 * 3 + 4));
    for (name, request) in &cases {
        let want = run(&reference, request.as_ref());
        for svc in candidates {
            let got = run(svc, request.as_ref());
            assert_eq!(got, want, "{} on {name}", svc.name());
        }
    }
}

#[test]
fn seed_outputs() {
    let auth = fixture::in_memory().unwrap();
    let s = ContractedService::new().unwrap();
    assert_eq!(s.my_reservations(&auth, 2).unwrap(), "Bossypants by Tina Fey\nBorn a Crime by Trevor Noah");
    assert_eq!(s.my_reservations(&auth, 1).unwrap(), "");
    assert_eq!(s.search_author(&auth, 1, "Trevor", "Noah").unwrap(), "Born a Crime");
    assert_eq!(s.search_author(&auth, 1, "Tina", "Fey").unwrap(), "Bossypants");
    assert_eq!(s.search_author(&auth, 1, "Nobody", "Here").unwrap(), "");
    assert_eq!(s.num_reservations(&auth, 1, "2").unwrap(), "1");
    assert_eq!(s.num_reservations(&auth, 1, "3").unwrap(), "0");
    assert_eq!(s.remove_reservation(&auth, 1, "1").unwrap(), 0);
    assert_eq!(s.remove_reservation(&auth, 2, "1").unwrap(), 1);
    assert_eq!(s.remove_reservation(&auth, 2, "9").unwrap(), 0);
    assert_eq!(s.reserve(&auth, 2, "1").unwrap(), 1);
    assert!(matches!(s.reserve(&auth, 2, "7"), Err(Error::Engine { .. })));
    let rows = auth
        .connection(fixture::LIBRARY_DB)
        .unwrap()
        .query("SELECT book, cardholder_id FROM reservations ORDER BY r_id", &[])
        .unwrap();
    assert_eq!(rows.rows, vec![vec![1.into(), 2.into()], vec![1.into(), 2.into()]]);
}

fn reservations(auth: &RootAuthority) -> Value {
    auth.make_view(fixture::LIBRARY_DB, "reservations").unwrap().into()
}

#[test]
fn reserving_for_another_cardholder_is_refused() {
    let auth = fixture::in_memory().unwrap();
    let before = snapshot(&auth);
    let forger = viewcap::define_contracted("library", "reserve", endpoints::reserve_contract(), |a| {
        let v = a[1].as_view().unwrap();
        Ok(Value::Integer(v.insert(&["book", "cardholder_id"], vec![vec![1.into(), 1.into()]])? as i64))
    })
    .unwrap();
    let err = with_user("2", || forger.call(vec!["1".into(), reservations(&auth)])).unwrap_err();
    assert!(matches!(err, Error::ViewConstraintViolation { .. }), "{err}");
    assert_eq!(snapshot(&auth), before);
}

#[test]
fn counting_reveals_no_rows() {
    let auth = fixture::in_memory().unwrap();
    let peek = viewcap::define_contracted("library", "num-reservations", endpoints::num_reservations_contract(), |a| {
        let rows = a[1].as_view().unwrap().fetch()?;
        Ok(format!("{}", rows.len()).into())
    })
    .unwrap();
    let err = with_user("1", || peek.call(vec!["2".into(), reservations(&auth)])).unwrap_err();
    let v = err.as_contract_violation().expect("contract violation");
    assert_eq!(v.privilege, Some(Privilege::Fetch));
    assert_eq!(v.blame.function, "num-reservations");
    let honest = Contracted::new().unwrap();
    let n = with_user("1", || honest.num_reservations.call(vec!["2".into(), reservations(&auth)])).unwrap();
    assert_eq!(n.as_text(), Some("1"));
}

#[test]
fn updates_and_writes_outside_the_contract_are_refused() {
    let auth = fixture::in_memory().unwrap();
    let sneaky = viewcap::define_contracted("library", "my-reservations", endpoints::my_reservations_contract(), |a| {
        a[0].as_view().unwrap().update("cardholder_id = 1", None)?;
        Ok("".into())
    })
    .unwrap();
    let books = auth.make_view(fixture::LIBRARY_DB, "books").unwrap();
    let authors = auth.make_view(fixture::LIBRARY_DB, "authors").unwrap();
    let err = with_user("2", || sneaky.call(vec![reservations(&auth), books.into(), authors.into()])).unwrap_err();
    assert_eq!(err.as_contract_violation().unwrap().privilege, Some(Privilege::Update));
}

/// The body never filters by user; only the contract keeps other
/// cardholders' reservations out of its view.
#[test]
fn contracts_stop_a_body_that_forgets_the_user() {
    let auth = fixture::in_memory().unwrap();
    let res = auth.make_view(fixture::LIBRARY_DB, "reservations").unwrap();
    let books = auth.make_view(fixture::LIBRARY_DB, "books").unwrap();
    let authors = auth.make_view(fixture::LIBRARY_DB, "authors").unwrap();
    let leaked = with_user("1", || endpoints::my_reservations_body(&res, &books, &authors)).unwrap();
    assert_eq!(leaked.lines().count(), 2);
    let fns = Contracted::new().unwrap();
    let kept = with_user("1", || fns.my_reservations.call(vec![res.into(), books.into(), authors.into()])).unwrap();
    assert_eq!(kept.as_text(), Some(""));
}
