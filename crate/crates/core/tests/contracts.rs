use proptest::prelude::*;
use viewcap::contract::{guard, valid_foreign_key, Position};
use viewcap::{
    current_user, define_contracted, sqlformat, with_user, ArgContract, BlameLabel, ContractViolation,
    ContractedFn, Error, FunctionContract, GroupDef, Modifier, Privilege, SqlValue, Value, ViewContract,
    ViewValue,
};
use viewcap_testkit::{students, triples, STUDENTS_DB};

use Privilege::*;

fn views() -> (ViewValue, ViewValue, viewcap::Connection) {
    let (auth, conn) = students();
    (
        auth.make_view(STUDENTS_DB, "students").unwrap(),
        auth.make_view(STUDENTS_DB, "advising").unwrap(),
        conn,
    )
}

fn violation(r: viewcap::Result<impl std::fmt::Debug>) -> ContractViolation {
    match r {
        Err(Error::Contract(v)) => v,
        other => panic!("expected a contract violation, got {other:?}"),
    }
}

fn blame(f: &str, i: usize) -> BlameLabel {
    BlameLabel::new("registrar", f, Position::Argument(i))
}

fn view_arg(v: &Value) -> &ViewValue {
    v.as_view().expect("view argument")
}

/// Students may be joined and filtered, but only names and emails come
/// back and grades cannot be probed.
fn students_contract() -> ViewContract {
    ViewContract::new()
        .grant(Join)
        .grant_with(Fetch, vec![Modifier::restrict_select("name, email").unwrap()])
        .grant_with(Where, vec![Modifier::prohibit("gpa").unwrap()])
}

fn advising_contract() -> ViewContract {
    ViewContract::permitting(&[Select, Where, Join, Fetch])
}

fn display_students(body: impl Fn(&[Value]) -> viewcap::Result<Value> + Send + Sync + 'static) -> ContractedFn {
    let post = Modifier::post(|v| {
        let user = current_user()?;
        v.filter(sqlformat("student = id AND advisor = $1", &[user.into()])?)
    });
    let with = Modifier::with(ViewContract::permitting(&[Select, Where, Fetch]));
    define_contracted(
        "registrar",
        "display-students",
        FunctionContract::new(
            vec![
                ArgContract::view(students_contract()).in_groups(&["X"]),
                ArgContract::view(advising_contract()).in_groups(&["X"]),
            ],
            ArgContract::Any,
        )
        .group(GroupDef::new("X", vec![post, with])),
        body,
    )
    .unwrap()
}

#[test]
fn fetch_only_contract_rejects_update_blaming_the_function() {
    let (s, _, conn) = views();
    let f = define_contracted(
        "registrar",
        "show",
        FunctionContract::new(vec![ArgContract::view(ViewContract::permitting(&[Fetch]))], ArgContract::Any),
        |args| {
            view_arg(&args[0]).update("gpa = 4.0", None)?;
            Ok(Value::Unit)
        },
    )
    .unwrap();
    let v = violation(f.call(vec![s.into()]));
    assert_eq!(v.blame, blame("show", 1));
    assert_eq!(v.privilege, Some(Update));
    let g = conn.query("SELECT gpa FROM students ORDER BY id", &[]).unwrap();
    assert_eq!(g.rows[0], vec![SqlValue::Real(2.5)]);
}

#[test]
fn prohibited_columns_cannot_be_filtered_on() {
    let (s, _, _) = views();
    let g = guard(&s, students_contract(), blame("f", 1)).unwrap();
    let v = violation(g.filter("gpa < 3.0"));
    assert_eq!(v.privilege, Some(Where));
    assert!(v.detail.contains("gpa"), "{}", v.detail);
    assert!(g.filter("name = 'Tig Notaro'").is_ok());
    assert!(violation(g.filter("NOT (gpa IS NULL) AND name = 'x'")).detail.contains("gpa"));
}

#[test]
fn restricted_fetch_projects_away_grades() {
    let (s, _, _) = views();
    let g = guard(&s, students_contract(), blame("f", 1)).unwrap();
    let rows = g.fetch().unwrap();
    assert_eq!(rows.columns, vec!["name", "email"]);
    assert_eq!(rows.len(), 3);
    let only_select = guard(&s, ViewContract::permitting(&[Select]), blame("f", 1)).unwrap();
    assert_eq!(violation(only_select.fetch()).privilege, Some(Fetch));
}

#[test]
fn joins_outside_a_shared_group_fail() {
    let (s, a, _) = views();
    let captured = std::sync::Mutex::new(Vec::new());
    let captured = std::sync::Arc::new(captured);
    let keep = captured.clone();
    let f = display_students(move |args| {
        keep.lock().unwrap().push((view_arg(&args[0]).clone(), view_arg(&args[1]).clone()));
        Ok(Value::Unit)
    });
    with_user("Jerome Seinfeld", || {
        f.call(vec![s.clone().into(), a.clone().into()]).unwrap();
        f.call(vec![s.clone().into(), a.clone().into()]).unwrap();
    });
    let calls = captured.lock().unwrap();
    let (s1, _) = &calls[0];
    let (_, a2) = &calls[1];
    let v = violation(s1.join(a2, None));
    assert_eq!(v.privilege, Some(Join));
    let v = violation(s1.join(&a, None));
    assert_eq!(v.privilege, Some(Join));
    let v = violation(a.join(s1, None));
    assert_eq!(v.privilege, Some(Join));
    with_user("Jerome Seinfeld", || {
        assert!(s1.join(&calls[0].1, None).is_ok());
    });
}

#[test]
fn group_contract_grants_grades_after_the_join_only() {
    let (s, a, _) = views();
    let f = display_students(|args| {
        let (s, a) = (view_arg(&args[0]), view_arg(&args[1]));
        let joined = s.join(a, None)?;
        Ok(Value::Rows(joined.select("name, email, gpa")?.fetch()?))
    });
    let rows = with_user("Jerome Seinfeld", || f.call(vec![s.clone().into(), a.clone().into()])).unwrap();
    let Value::Rows(rows) = rows else { panic!("rows") };
    assert_eq!(
        triples(&rows),
        vec![
            ("Mike Birbiglia".into(), "birbigms@college.edu".into(), 2.5),
            ("Tig Notaro".into(), "tnotaro@college.edu".into(), 3.9),
        ]
    );
    let pre_join = display_students(|args| Ok(Value::Rows(view_arg(&args[0]).fetch()?)));
    let Value::Rows(rows) = with_user("Jerome Seinfeld", || pre_join.call(vec![s.clone().into(), a.clone().into()])).unwrap() else {
        panic!("rows")
    };
    assert_eq!(rows.columns, vec!["name", "email"]);
    let probe = display_students(|args| Ok(Value::View(view_arg(&args[0]).filter("gpa > 3")?)));
    let v = violation(with_user("Jerome Seinfeld", || probe.call(vec![s.clone().into(), a.clone().into()])));
    assert_eq!(v.blame, BlameLabel::new("registrar", "display-students", Position::Argument(1)));
}

#[test]
fn post_transforms_read_the_user_at_join_time() {
    let (s, a, _) = views();
    let f = display_students(|args| Ok(Value::View(view_arg(&args[0]).clone())));
    let g = display_students(|args| Ok(Value::View(view_arg(&args[1]).clone())));
    let _ = (f, g);
    let captured = std::sync::Arc::new(std::sync::Mutex::new(None));
    let keep = captured.clone();
    let f = display_students(move |args| {
        *keep.lock().unwrap() = Some((view_arg(&args[0]).clone(), view_arg(&args[1]).clone()));
        Ok(Value::Unit)
    });
    with_user("nobody", || f.call(vec![s.into(), a.into()])).unwrap();
    let (gs, ga) = captured.lock().unwrap().clone().unwrap();
    let names = |user: &str| {
        with_user(user, || gs.join(&ga, None))
            .unwrap()
            .select("name")
            .unwrap()
            .fetch()
            .unwrap()
            .len()
    };
    assert_eq!(names("Jerome Seinfeld"), 2);
    assert_eq!(names("Joan Rivers"), 1);
    assert!(matches!(gs.join(&ga, None), Err(Error::NoUserContext)));
}

#[test]
fn group_free_joins_inherit_both_stacks() {
    let (s, a, _) = views();
    let gs = guard(&s, students_contract(), blame("f", 1)).unwrap();
    let ga = guard(&a, advising_contract(), blame("f", 2)).unwrap();
    let joined = gs.join(&ga, Some("id = student")).unwrap();
    assert_eq!(joined.layer_count(), 2);
    let rows = joined.fetch().unwrap();
    assert_eq!(rows.columns, vec!["name", "email"]);
    assert_eq!(violation(joined.select("name, gpa")).blame, blame("f", 1));
    assert!(violation(joined.filter("gpa > 3")).detail.contains("gpa"));
    let fetch_only = guard(&a, ViewContract::permitting(&[Fetch]), blame("g", 1)).unwrap();
    assert_eq!(violation(gs.join(&fetch_only, None)).blame, blame("g", 1));
    assert!(s.join(&ga, Some("id = student")).is_ok());
}

#[test]
fn empty_contracts_do_not_wrap() {
    let (s, _, _) = views();
    let g = guard(&s, ViewContract::new(), blame("f", 1)).unwrap();
    assert!(!g.is_guarded());
    assert_eq!(g.fetch().unwrap(), s.fetch().unwrap());
    let f = define_contracted(
        "registrar",
        "grades",
        FunctionContract::new(
            vec![ArgContract::view(ViewContract::new()), ArgContract::view(ViewContract::new())],
            ArgContract::Any,
        ),
        |_| Ok(Value::Unit),
    )
    .unwrap();
    let v = violation(f.call(vec![Value::Text("students".into()), s.clone().into()]));
    assert_eq!(v.blame, BlameLabel::new("registrar", "grades", Position::Argument(1)));
    assert_eq!(v.privilege, None);
    assert!(matches!(
        f.call(vec![s.into()]),
        Err(Error::ArityMismatch { expected: 2, actual: 1 })
    ));
}

#[test]
fn layers_are_checked_outermost_first() {
    let (s, _, _) = views();
    let inner = guard(&s, ViewContract::permitting(&[Fetch, Where]), blame("b1", 1)).unwrap();
    let outer = guard(&inner, ViewContract::permitting(&[Fetch]), blame("b2", 1)).unwrap();
    assert_eq!(violation(outer.filter("id = 1")).blame, blame("b2", 1));
    let both = guard(&inner, ViewContract::permitting(&[Select]), blame("b2", 1)).unwrap();
    assert_eq!(violation(both.fetch()).blame, blame("b2", 1));
    let ok = guard(&inner, ViewContract::permitting(&[Where, Fetch]), blame("b2", 1)).unwrap();
    assert_eq!(ok.filter("id = 1").unwrap().fetch().unwrap().len(), 1);
    assert_eq!(ok.filter("id = 1").unwrap().layer_count(), 2);
}

#[test]
fn restricts_compose_outermost_first() {
    let (s, _, _) = views();
    let inner = guard(
        &s,
        ViewContract::new().grant_with(Fetch, vec![Modifier::restrict_where("gpa > 3").unwrap()]),
        blame("b1", 1),
    )
    .unwrap();
    let outer = guard(
        &inner,
        ViewContract::new().grant_with(Fetch, vec![Modifier::restrict_select("name, gpa").unwrap()]),
        blame("b2", 1),
    )
    .unwrap();
    let rows = outer.fetch().unwrap();
    assert_eq!(rows.columns, vec!["name", "gpa"]);
    assert_eq!(rows.len(), 2);
    let wrong_order = guard(
        &guard(
            &s,
            ViewContract::new().grant_with(Fetch, vec![Modifier::restrict_select("name").unwrap()]),
            blame("b1", 1),
        )
        .unwrap(),
        ViewContract::new().grant_with(Fetch, vec![Modifier::restrict_where("gpa > 3").unwrap()]),
        blame("b2", 1),
    )
    .unwrap();
    assert_eq!(wrong_order.fetch().unwrap().len(), 2);
}

#[test]
fn every_operation_checks_each_layer_once() {
    let (s, a, _) = views();
    let g = guard(
        &guard(&s, ViewContract::permitting(&Privilege::ALL), blame("b1", 1)).unwrap(),
        ViewContract::permitting(&Privilege::ALL),
        blame("b2", 1),
    )
    .unwrap();
    let ops: Vec<Box<dyn Fn(&ViewValue) -> viewcap::Result<()>>> = vec![
        Box::new(|v| v.filter("id > 0").map(drop)),
        Box::new(|v| v.select("name").map(drop)),
        Box::new(|v| v.aggregate("COUNT(*)").map(drop)),
        Box::new(|v| v.fetch().map(drop)),
        Box::new(|v| v.update("gpa = gpa", None).map(drop)),
        Box::new(|v| v.delete(Some("1 = 0")).map(drop)),
        Box::new(|v| v.insert::<&str>(&[], Vec::new()).map(drop)),
        Box::new(|v| v.join(&a, Some("id = student")).map(drop)),
    ];
    for op in ops {
        let before = g.layer_check_counts();
        op(&g).unwrap();
        let after = g.layer_check_counts();
        assert_eq!(after, before.iter().map(|c| c + 1).collect::<Vec<_>>());
    }
    let derived = g.filter("id > 1").unwrap();
    let before = derived.layer_check_counts();
    derived.fetch().unwrap();
    assert_eq!(derived.layer_check_counts(), before.iter().map(|c| c + 1).collect::<Vec<_>>());
}

#[test]
fn restricted_delete_rewrites_the_scope() {
    let (s, _, conn) = views();
    let g = guard(
        &s,
        ViewContract::new().grant_with(Delete, vec![Modifier::restrict_where("id = 3").unwrap()]),
        blame("f", 1),
    )
    .unwrap();
    assert_eq!(g.delete(None).unwrap(), 1);
    let names = conn.query("SELECT name FROM students ORDER BY id", &[]).unwrap();
    assert_eq!(
        names.rows,
        vec![vec!["Mike Birbiglia".into()], vec![SqlValue::from("Tig Notaro")]]
    );
}

#[test]
fn restricted_insert_tightens_the_check() {
    let (s, _, _) = views();
    let g = guard(
        &s,
        ViewContract::new().grant_with(Insert, vec![Modifier::restrict_where("gpa < 2").unwrap()]),
        blame("f", 1),
    )
    .unwrap();
    let cols = ["name", "email", "gpa"];
    let err = g
        .insert(&cols, vec![vec!["A".into(), "a@x".into(), 3.0.into()]])
        .unwrap_err();
    assert_eq!(err.to_string(), "insert: violated view constraint: gpa < 2");
    assert_eq!(g.insert(&cols, vec![vec!["A".into(), "a@x".into(), 1.0.into()]]).unwrap(), 1);
}

#[test]
fn aggregate_allow_lists_havings_and_with() {
    let (s, _, _) = views();
    let g = guard(
        &s,
        ViewContract::new()
            .grant(Where)
            .grant_with(Aggregate, vec![Modifier::aggrs_named("MIN, MAX").unwrap()]),
        blame("f", 1),
    )
    .unwrap();
    let v = violation(g.aggregate("COUNT(*)"));
    assert_eq!(v.privilege, Some(Aggregate));
    assert!(v.detail.contains("COUNT"), "{}", v.detail);
    let mx = g.aggregate("MAX(gpa)").unwrap();
    assert_eq!(violation(mx.fetch()).privilege, Some(Fetch));

    let counted = guard(
        &s,
        ViewContract::new().grant(Where).grant_with(
            Aggregate,
            vec![
                Modifier::having("COUNT(*) >= 2").unwrap(),
                Modifier::with(ViewContract::permitting(&[Fetch])),
            ],
        ),
        blame("f", 1),
    )
    .unwrap();
    assert_eq!(violation(counted.fetch()).privilege, Some(Fetch));
    let many = counted.filter("gpa > 3").unwrap().aggregate("COUNT(*)").unwrap();
    assert_eq!(many.fetch().unwrap().rows, vec![vec![SqlValue::Integer(2)]]);
    let few = counted.filter("gpa > 3.5").unwrap().aggregate("COUNT(*)").unwrap();
    assert!(few.fetch().unwrap().is_empty());
    assert!(violation(many.filter("1 = 1")).privilege == Some(Where));
}

#[test]
fn foreign_key_preconditions() {
    let conn = viewcap::Connection::open_in_memory().unwrap();
    conn.execute_batch(
        "CREATE TABLE authors (author_id INTEGER PRIMARY KEY, name TEXT);
         CREATE TABLE books (book_id INTEGER PRIMARY KEY, author INTEGER REFERENCES authors(author_id), title TEXT);
         INSERT INTO authors VALUES (1, 'Trevor Noah');
         INSERT INTO books VALUES (1, 1, 'Born a Crime');",
    )
    .unwrap();
    let auth = viewcap::RootAuthority::with_connection("lib", conn);
    let authors = auth.make_view("lib", "authors").unwrap();
    let books = auth.make_view("lib", "books").unwrap();
    let f = define_contracted(
        "library",
        "titles",
        FunctionContract::new(
            vec![
                ArgContract::view(ViewContract::permitting(&[Join])).in_groups(&["fk"]),
                ArgContract::view(ViewContract::permitting(&[Join])).in_groups(&["fk"]),
                ArgContract::String,
            ],
            ArgContract::Any,
        )
        .group(GroupDef::new(
            "fk",
            vec![valid_foreign_key(), Modifier::with(ViewContract::permitting(&[Select, Fetch]))],
        )),
        |args| {
            let clause = args[2].as_text().unwrap();
            let j = view_arg(&args[0]).join(view_arg(&args[1]), Some(clause))?;
            Ok(Value::Rows(j.select("title")?.fetch()?))
        },
    )
    .unwrap();
    let ok = f
        .call(vec![authors.clone().into(), books.clone().into(), "author_id = author".into()])
        .unwrap();
    assert!(matches!(ok, Value::Rows(r) if r.len() == 1));
    let v = violation(f.call(vec![authors.into(), books.into(), "author_id = book_id".into()]));
    assert_eq!(v.blame.position, Position::Group("fk".into()));
}

#[test]
fn malformed_contracts_are_rejected() {
    let (s, _, _) = views();
    let bad = ViewContract::new().grant_with(Fetch, vec![Modifier::prohibit("gpa").unwrap()]);
    assert!(matches!(guard(&s, bad, blame("f", 1)), Err(Error::MalformedContract(_))));
    let two_withs = ViewContract::new().grant_with(
        Aggregate,
        vec![Modifier::with(ViewContract::new()), Modifier::with(ViewContract::new())],
    );
    assert!(matches!(guard(&s, two_withs, blame("f", 1)), Err(Error::MalformedContract(_))));
    let undefined = FunctionContract::new(
        vec![ArgContract::view(ViewContract::permitting(&[Join])).in_groups(&["Y"])],
        ArgContract::Any,
    );
    assert!(matches!(
        define_contracted("c", "f", undefined, |_| Ok(Value::Unit)),
        Err(Error::MalformedContract(_))
    ));
    let ambiguous = FunctionContract::new(
        vec![
            ArgContract::view(ViewContract::permitting(&[Join])).in_groups(&["X", "Y"]),
            ArgContract::view(ViewContract::permitting(&[Join])).in_groups(&["X", "Y"]),
        ],
        ArgContract::Any,
    )
    .group(GroupDef::new("X", vec![Modifier::with(ViewContract::new())]))
    .group(GroupDef::new("Y", vec![Modifier::with(ViewContract::new())]));
    assert!(matches!(
        define_contracted("c", "f", ambiguous, |_| Ok(Value::Unit)),
        Err(Error::MalformedContract(_))
    ));
}

#[test]
fn result_contracts() {
    let (s, _, _) = views();
    let leaky = define_contracted(
        "registrar",
        "leak",
        FunctionContract::new(vec![ArgContract::Any], ArgContract::String),
        |args| Ok(args[0].clone()),
    )
    .unwrap();
    let v = violation(leaky.call(vec![s.clone().into()]));
    assert_eq!(v.blame.position, Position::Result);
    let narrowing = define_contracted(
        "registrar",
        "narrow",
        FunctionContract::new(
            vec![ArgContract::Any],
            ArgContract::view(ViewContract::permitting(&[Fetch])),
        ),
        |args| Ok(args[0].clone()),
    )
    .unwrap();
    let Value::View(out) = narrowing.call(vec![s.into()]).unwrap() else { panic!("view") };
    assert_eq!(violation(out.filter("id = 1")).blame.position, Position::Result);
}

fn privilege_set() -> impl Strategy<Value = Vec<Privilege>> {
    proptest::sample::subsequence(Privilege::ALL.to_vec(), 1..=8)
}

fn attempt(v: &ViewValue, p: Privilege, a: &ViewValue) -> viewcap::Result<()> {
    match p {
        Fetch => v.fetch().map(drop),
        Update => v.update("gpa = gpa", None).map(drop),
        Delete => v.delete(Some("1 = 0")).map(drop),
        Insert => v.insert::<&str>(&[], Vec::new()).map(drop),
        Where => v.filter("id > 0").map(drop),
        Select => v.select("id, gpa").map(drop),
        Aggregate => v.aggregate("COUNT(*)").map(drop),
        Join => v.join(a, None).map(drop),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stacked_layers_permit_exactly_the_intersection(
        first in privilege_set(),
        second in privilege_set(),
        op in proptest::sample::select(Privilege::ALL.to_vec()),
    ) {
        let (s, a, _) = views();
        let inner = guard(&s, ViewContract::permitting(&first), blame("inner", 1)).unwrap();
        let outer = guard(&inner, ViewContract::permitting(&second), blame("outer", 1)).unwrap();
        let expected = first.contains(&op) && second.contains(&op);
        let got = attempt(&outer, op, &a);
        prop_assert_eq!(got.is_ok(), expected, "{:?}", got);
        if let Err(e) = got {
            let v = e.as_contract_violation().unwrap();
            let culprit = if second.contains(&op) { "inner" } else { "outer" };
            prop_assert_eq!(&v.blame.function, culprit);
        }
    }

    #[test]
    fn derived_views_never_gain_privileges(
        granted in privilege_set(),
        steps in proptest::collection::vec(0u8..2, 0..4),
        op in proptest::sample::select(Privilege::ALL.to_vec()),
    ) {
        let (s, a, _) = views();
        let mut v = guard(&s, ViewContract::permitting(&granted), blame("f", 1)).unwrap();
        for step in steps {
            let next = if step == 0 { v.filter("gpa > 0") } else { v.select("id, gpa") };
            match next {
                Ok(n) => v = n,
                Err(e) => prop_assert!(e.as_contract_violation().is_some()),
            }
        }
        let got = attempt(&v, op, &a);
        if !granted.contains(&op) {
            prop_assert!(got.as_ref().err().and_then(|e| e.as_contract_violation()).is_some(), "{:?}", got);
        }
        if let Ok(()) = got {
            prop_assert!(granted.contains(&op));
        }
    }
}
