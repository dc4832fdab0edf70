//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::time::{Duration, Instant};

use bench::micro::{self, run_micro};
use bench::variants::{self, Variant};
use bench::workload::{run_interleaved, Kind, WorkloadSpec};
use bench::Estimate;
use library::fixture;
use library::service::{ContractedService, DirectSql, Service};
use viewcap::contract::{guard, Position};
use viewcap::sql::{parse_predicate, render, Ident};
use viewcap::{
    current_user, define_contracted, sqlformat, with_user, ArgContract, BlameLabel, ContractedFn, Error,
    FunctionContract, GroupDef, Modifier, Privilege::*, SqlValue, Validation, Value, ViewContract, ViewValue,
};
use viewcap_testkit::gen::{Gen, Ty};
use viewcap_testkit::injection::{check_payloads, PAYLOADS};
use viewcap_testkit::triggers::{concurrent_insert, trigger_hygiene};
use viewcap_testkit::{cases, grades_for_advisees, students, triples, STUDENTS_DB};

type Outcome = Result<String, String>;

fn ensure(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn table(conn: &viewcap::Connection, t: &str) -> Result<Vec<Vec<SqlValue>>, String> {
    Ok(conn.query(&format!("SELECT * FROM {t} ORDER BY rowid"), &[]).map_err(e)?.rows)
}

fn check_option() -> Outcome {
    let (auth, conn) = students();
    let s = auth.make_view(STUDENTS_DB, "students").map_err(e)?;
    let before = table(&conn, "students")?;
    let err = s.filter("gpa <= 2.5").and_then(|v| v.update("gpa = 3.7", None));
    let text = match err {
        Err(err @ Error::ViewConstraintViolation { .. }) => err.to_string(),
        other => return Err(format!("expected a view constraint violation, got {other:?}")),
    };
    ensure(text == "update: violated view constraint: gpa <= 2.5", format!("message {text:?}"))?;
    ensure(table(&conn, "students")? == before, "table changed after the failed update")?;
    let n = s.update("gpa = 3.7", Some("gpa <= 2.5")).map_err(e)?;
    let after = table(&conn, "students")?;
    let changed = before.iter().zip(&after).filter(|(a, b)| a != b).count();
    ensure(n == 1 && changed == 1, format!("per-operation where changed {n}/{changed} rows"))?;
    Ok(format!("{text:?}; per-operation where changed 1 row"))
}

fn advisees() -> Outcome {
    let (auth, _) = students();
    let s = auth.make_view(STUDENTS_DB, "students").map_err(e)?;
    let a = auth.make_view(STUDENTS_DB, "advising").map_err(e)?;
    let jerome = with_user("Jerome Seinfeld", || grades_for_advisees(&s, &a)).map_err(e)?;
    let joan = with_user("Joan Rivers", || grades_for_advisees(&s, &a)).map_err(e)?;
    ensure(
        triples(&jerome)
            == vec![
                ("Mike Birbiglia".into(), "birbigms@college.edu".into(), 2.5),
                ("Tig Notaro".into(), "tnotaro@college.edu".into(), 3.9),
            ],
        format!("Jerome Seinfeld got {:?}", triples(&jerome)),
    )?;
    ensure(
        triples(&joan) == vec![("Patton Oswalt".into(), "poswalt@college.edu".into(), 3.4)],
        format!("Joan Rivers got {:?}", triples(&joan)),
    )?;
    Ok("2 rows for Jerome Seinfeld, 1 for Joan Rivers".into())
}

fn privilege_of(r: viewcap::Result<impl std::fmt::Debug>) -> Result<Option<viewcap::Privilege>, String> {
    match r {
        Err(Error::Contract(v)) => Ok(v.privilege),
        other => Err(format!("expected a contract violation, got {other:?}")),
    }
}

fn display_students(body: impl Fn(&[Value]) -> viewcap::Result<Value> + Send + Sync + 'static) -> Result<ContractedFn, String> {
    let students = ViewContract::new()
        .grant(Join)
        .grant_with(Fetch, vec![Modifier::restrict_select("name, email").map_err(e)?])
        .grant_with(Where, vec![Modifier::prohibit("gpa").map_err(e)?]);
    let advising = ViewContract::permitting(&[Select, Where, Join, Fetch]);
    let post = Modifier::post(|v| v.filter(sqlformat("student = id AND advisor = $1", &[current_user()?.into()])?));
    define_contracted(
        "registrar",
        "display-students",
        FunctionContract::new(
            vec![
                ArgContract::view(students).in_groups(&["X"]),
                ArgContract::view(advising).in_groups(&["X"]),
            ],
            ArgContract::Any,
        )
        .group(GroupDef::new("X", vec![post, Modifier::with(ViewContract::permitting(&[Select, Where, Fetch]))])),
        body,
    )
    .map_err(e)
}

fn arg(v: &Value) -> &ViewValue {
    v.as_view().expect("view argument")
}

fn contracts() -> Outcome {
    let (auth, conn) = students();
    let s = auth.make_view(STUDENTS_DB, "students").map_err(e)?;
    let a = auth.make_view(STUDENTS_DB, "advising").map_err(e)?;

    let show = define_contracted(
        "registrar",
        "show",
        FunctionContract::new(vec![ArgContract::view(ViewContract::permitting(&[Fetch]))], ArgContract::Any),
        |args| Ok(Value::Integer(arg(&args[0]).update("gpa = 4.0", None)? as i64)),
    )
    .map_err(e)?;
    match show.call(vec![s.clone().into()]) {
        Err(Error::Contract(v))
            if v.privilege == Some(Update)
                && v.blame == BlameLabel::new("registrar", "show", Position::Argument(1)) => {}
        other => return Err(format!("(a) update on a fetch-only view gave {other:?}")),
    }
    ensure(
        conn.query("SELECT gpa FROM students WHERE id = 1", &[]).map_err(e)?.rows == vec![vec![SqlValue::Real(2.5)]],
        "(a) table changed",
    )?;

    let blame = BlameLabel::new("registrar", "f", Position::Argument(1));
    let prohibited = guard(
        &s,
        ViewContract::new().grant(Fetch).grant_with(Where, vec![Modifier::prohibit("gpa").map_err(e)?]),
        blame.clone(),
    )
    .map_err(e)?;
    ensure(privilege_of(prohibited.filter("gpa < 3.0"))? == Some(Where), "(b) wrong privilege")?;

    let restricted = guard(
        &s,
        ViewContract::new().grant_with(Fetch, vec![Modifier::restrict_select("name, email").map_err(e)?]),
        blame,
    )
    .map_err(e)?;
    let rows = restricted.fetch().map_err(e)?;
    ensure(rows.columns == vec!["name", "email"] && rows.len() == 3, format!("(c) fetched {:?}", rows.columns))?;

    let captured = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
    let keep = captured.clone();
    let f = display_students(move |args| {
        keep.lock().unwrap().push((arg(&args[0]).clone(), arg(&args[1]).clone()));
        Ok(Value::Unit)
    })?;
    with_user("Jerome Seinfeld", || -> Result<(), String> {
        f.call(vec![s.clone().into(), a.clone().into()]).map_err(e)?;
        f.call(vec![s.clone().into(), a.clone().into()]).map_err(e)?;
        Ok(())
    })?;
    let calls = captured.lock().unwrap().clone();
    ensure(privilege_of(calls[0].0.join(&calls[1].1, None))? == Some(Join), "(d) cross-call join")?;
    ensure(privilege_of(calls[0].0.join(&a, None))? == Some(Join), "(d) join with an outside view")?;

    let f = display_students(|args| {
        let joined = arg(&args[0]).join(arg(&args[1]), None)?;
        Ok(Value::Rows(joined.select("name, email, gpa")?.fetch()?))
    })?;
    let out = with_user("Jerome Seinfeld", || f.call(vec![s.clone().into(), a.clone().into()])).map_err(e)?;
    let Value::Rows(rows) = out else {
        return Err("(e) no rows".into());
    };
    ensure(
        triples(&rows).iter().map(|t| t.2).collect::<Vec<_>>() == vec![2.5, 3.9],
        format!("(e) post-join grades {:?}", triples(&rows)),
    )?;
    let pre = display_students(|args| Ok(Value::Rows(arg(&args[0]).fetch()?)))?;
    let out = with_user("Jerome Seinfeld", || pre.call(vec![s.clone().into(), a.clone().into()])).map_err(e)?;
    let Value::Rows(rows) = out else {
        return Err("(e) no rows".into());
    };
    ensure(rows.columns == vec!["name", "email"], "(e) pre-join fetch exposed grades")?;
    let probe = display_students(|args| Ok(Value::View(arg(&args[0]).filter("gpa > 3")?)))?;
    ensure(
        privilege_of(with_user("Jerome Seinfeld", || probe.call(vec![s.clone().into(), a.clone().into()])))?
            == Some(Where),
        "(e) pre-join grade probe",
    )?;
    Ok("(a)-(e) all enforced".into())
}

fn oracle() -> Outcome {
    const N: u64 = 300;
    for seed in 0..N {
        cases::fetch_case(seed)?;
        cases::write_case(seed)?;
    }
    Ok(format!("{} fetch and {} write cases agree", N, N))
}

fn policy() -> Outcome {
    let reference = DirectSql;
    let contracted = ContractedService::new().map_err(e)?;
    let mut n = 0;
    let snapshot = |auth: &viewcap::RootAuthority| -> Result<String, String> {
        let conn = auth.connection(fixture::LIBRARY_DB).map_err(e)?;
        let mut out = String::new();
        for t in ["cardholders", "authors", "books", "reservations"] {
            out.push_str(&format!("{:?}", table(&conn, t)?));
        }
        Ok(out)
    };
    type Req = Box<dyn Fn(&dyn Service, &viewcap::RootAuthority) -> viewcap::Result<String>>;
    let mut grid: Vec<Req> = Vec::new();
    for card in [1i64, 2, 3] {
        grid.push(Box::new(move |s, a| s.my_reservations(a, card)));
        for id in ["1", "2", "3", "x"] {
            grid.push(Box::new(move |s, a| s.reserve(a, card, id).map(|n| n.to_string())));
            grid.push(Box::new(move |s, a| s.remove_reservation(a, card, id).map(|n| n.to_string())));
            grid.push(Box::new(move |s, a| s.num_reservations(a, card, id)));
        }
        for (f, l) in [("Trevor", "Noah"), ("Tina", "Fey"), ("Tina", "Noah")] {
            grid.push(Box::new(move |s, a| s.search_author(a, card, f, l)));
        }
    }
    for req in &grid {
        let run = |svc: &dyn Service| -> Result<(Result<String, &'static str>, String), String> {
            let auth = fixture::in_memory().map_err(e)?;
            let out = req(svc, &auth).map_err(|err| match err {
                Error::Contract(_) | Error::ViewConstraintViolation { .. } => "forbidden",
                Error::Engine { .. } => "engine",
                _ => "other",
            });
            Ok((out, snapshot(&auth)?))
        };
        ensure(run(&contracted)? == run(&reference)?, format!("grid request {n} differs from the reference"))?;
        n += 1;
    }

    let auth = fixture::in_memory().map_err(e)?;
    let res = || auth.make_view(fixture::LIBRARY_DB, "reservations").map_err(e);
    let forger = define_contracted("library", "reserve", library::endpoints::reserve_contract(), |a| {
        let n = arg(&a[1]).insert(&["book", "cardholder_id"], vec![vec![1.into(), 1.into()]])?;
        Ok(Value::Integer(n as i64))
    })
    .map_err(e)?;
    let forged = with_user("2", || forger.call(vec!["1".into(), res().unwrap().into()]));
    ensure(matches!(forged, Err(Error::ViewConstraintViolation { .. })), format!("cross-user reserve gave {forged:?}"))?;
    ensure(contracted.remove_reservation(&auth, 1, "1").map_err(e)? == 0, "cross-user remove deleted a row")?;
    ensure(
        contracted.my_reservations(&auth, 2).map_err(e)? == "Bossypants by Tina Fey\nBorn a Crime by Trevor Noah",
        "my_reservations for card 2",
    )?;
    ensure(contracted.search_author(&auth, 1, "Trevor", "Noah").map_err(e)? == "Born a Crime", "search Trevor Noah")?;
    ensure(contracted.num_reservations(&auth, 1, "2").map_err(e)? == "1", "count for book 2")?;
    let peek = define_contracted("library", "num-reservations", library::endpoints::num_reservations_contract(), |a| {
        Ok(arg(&a[1]).fetch()?.len().to_string().into())
    })
    .map_err(e)?;
    let peeked = with_user("1", || peek.call(vec!["2".into(), res().unwrap().into()]));
    ensure(privilege_of(peeked)? == Some(Fetch), "direct fetch of the count view")?;
    Ok(format!("{n} grid requests match the reference; targeted checks hold"))
}

fn injection() -> Outcome {
    let (auth, conn) = students();
    let s = auth.make_view(STUDENTS_DB, "students").map_err(e)?;
    let checked = check_payloads("name = $1", &s, &conn)?;
    ensure(checked == PAYLOADS.len() && checked == 50, "payload count")?;
    let cols = vec![
        (Ident::new("id"), Ty::Int),
        (Ident::new("a"), Ty::Int),
        (Ident::new("b"), Ty::Int),
        (Ident::new("c"), Ty::Text),
    ];
    const ROUNDS: u64 = 2000;
    let mut g = Gen::new(42);
    for i in 0..ROUNDS {
        let p = g.predicate(&cols, 4);
        let once = parse_predicate(&render(&p)).map_err(|err| format!("round {i}: {err} in {}", render(&p)))?;
        let twice = parse_predicate(&render(&once)).map_err(e)?;
        ensure(once == twice && render(&once) == render(&twice), format!("round {i}: {} unstable", render(&p)))?;
    }
    Ok(format!("{checked} payloads stay literals; {ROUNDS} round trips stable"))
}

fn triggers() -> Outcome {
    let h = trigger_hygiene(1000, 11)?;
    ensure(h.rejected > 0 && h.engine_errors > 0, format!("no induced failures: {h:?}"))?;
    let dir = tempfile::tempdir().map_err(e)?;
    concurrent_insert(dir.path())?;
    Ok(format!(
        "1000 writes ({} ok, {} rejected, {} engine errors), 0 triggers left; second connection inserted",
        h.succeeded, h.rejected, h.engine_errors
    ))
}

fn performance() -> Outcome {
    let make = |n: &str| variants::by_name(n).expect("registered").map_err(e);
    let (base, capql, full) = (make("baseline")?, make("capql")?, make("contracts")?);
    let vs: [&dyn Variant; 3] = [base.as_ref(), capql.as_ref(), full.as_ref()];
    let spec = WorkloadSpec {
        kind: Kind::ReadWrite,
        count: Kind::ReadWrite.default_count(),
        seed: 1,
    };
    let r = run_interleaved(spec, &vs, 10, Validation::On).map_err(e)?;
    let (b, c, f) = (r[0].estimate(), r[1].estimate(), r[2].estimate());
    ensure(b.at_most(c), format!("(a) baseline {b:?} above capql {c:?}"))?;
    ensure(c.at_most(f), format!("(a) capql {c:?} above contracts {f:?}"))?;
    let limit = Estimate {
        mean: 1.25 * c.mean,
        ci: 1.25 * c.ci,
    };
    ensure(f.at_most(limit), format!("(a) contracts overhead {:.1}%", 100.0 * (f.mean / c.mean - 1.0)))?;

    let w = micro::by_name("where").expect("registered");
    let slowdown = |m: &dyn micro::Micro, p: f64| -> Result<Estimate, String> {
        let (b, c) = run_micro(m, 50_000, p, 10, Validation::On).map_err(e)?;
        Ok(c.estimate().ratio(b.estimate()))
    };
    let (w0, w100) = (slowdown(w.as_ref(), 0.0)?, slowdown(w.as_ref(), 100.0)?);
    ensure(w100.at_most(w0), format!("(b) where slowdown {w100:?} at 100% vs {w0:?} at 0%"))?;
    let (ins, ins_nt) = (micro::by_name("insert").unwrap(), micro::by_name("insert-nt").unwrap());
    let (i1, i0) = (slowdown(ins.as_ref(), 50.0)?, slowdown(ins_nt.as_ref(), 50.0)?);
    ensure(i0.at_most(i1), format!("(c) insert slowdown {i1:?} with triggers vs {i0:?} without"))?;
    Ok(format!(
        "rw ms: baseline {:.1}, capql {:.1}, contracts {:.1} (+{:.1}%); where slowdown {:.3}x at 0%, {:.3}x at 100%; insert {:.3}x with triggers, {:.3}x without",
        b.mean,
        c.mean,
        f.mean,
        100.0 * (f.mean / c.mean - 1.0),
        w0.mean,
        w100.mean,
        i1.mean,
        i0.mean
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, u64); 8] = [
        ("check option on a filtered view", check_option, 1),
        ("advisee grades per user", advisees, 1),
        ("contract enforcement", contracts, 5),
        ("engine agrees with the oracle", oracle, 60),
        ("library policy suite", policy, 10),
        ("injection and round trips", injection, 30),
        ("trigger hygiene and isolation", triggers, 30),
        ("performance ordering", performance, 600),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(_) if took > Duration::from_secs(*limit) => Err(format!("took {took:.1?}, limit {limit}s")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} [{took:.2?}] {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} [{took:.2?}] {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
