use viewcap::{current_user, with_user, Error, SqlValue};
use viewcap_testkit::{grades_for_advisees, students, triples, STUDENTS_DB};

fn table_bytes(conn: &viewcap::Connection, table: &str) -> String {
    let rows = conn
        .query(&format!("SELECT * FROM {table} ORDER BY rowid"), &[])
        .unwrap();
    format!("{:?}", rows.rows)
}

#[test]
fn view_predicate_is_a_check_option() {
    let (auth, conn) = students();
    let before = table_bytes(&conn, "students");
    let low = auth
        .make_view(STUDENTS_DB, "students")
        .unwrap()
        .filter("gpa <= 2.5")
        .unwrap();
    let err = low.update("gpa = 3.7", None).unwrap_err();
    assert_eq!(err.to_string(), "update: violated view constraint: gpa <= 2.5");
    assert!(matches!(err, Error::ViewConstraintViolation { .. }));
    assert_eq!(table_bytes(&conn, "students"), before);
    assert!(conn.temp_triggers().unwrap().is_empty());
}

#[test]
fn per_operation_where_is_not_a_check_option() {
    let (auth, conn) = students();
    let all = auth.make_view(STUDENTS_DB, "students").unwrap();
    assert_eq!(all.update("gpa = 3.7", Some("gpa <= 2.5")).unwrap(), 1);
    let rows = conn
        .query("SELECT gpa FROM students ORDER BY id", &[])
        .unwrap();
    assert_eq!(
        rows.rows,
        vec![vec![SqlValue::Real(3.7)], vec![SqlValue::Real(3.9)], vec![SqlValue::Real(3.4)]]
    );
}

#[test]
fn advisees_depend_on_the_current_user() {
    let (auth, _) = students();
    let s = auth.make_view(STUDENTS_DB, "students").unwrap();
    let a = auth.make_view(STUDENTS_DB, "advising").unwrap();
    let jerome = with_user("Jerome Seinfeld", || grades_for_advisees(&s, &a)).unwrap();
    assert_eq!(
        triples(&jerome),
        vec![
            ("Mike Birbiglia".into(), "birbigms@college.edu".into(), 2.5),
            ("Tig Notaro".into(), "tnotaro@college.edu".into(), 3.9),
        ]
    );
    let joan = with_user("Joan Rivers", || grades_for_advisees(&s, &a)).unwrap();
    assert_eq!(
        triples(&joan),
        vec![("Patton Oswalt".into(), "poswalt@college.edu".into(), 3.4)]
    );
}

#[test]
fn user_context_nests_and_is_required() {
    assert!(matches!(current_user(), Err(Error::NoUserContext)));
    let inner = with_user("A", || with_user("B", current_user)).unwrap();
    assert_eq!(inner, "B");
    assert_eq!(with_user("A", current_user).unwrap(), "A");
    assert!(matches!(current_user(), Err(Error::NoUserContext)));
}

#[test]
fn make_view_checks_the_table() {
    let (auth, _) = students();
    assert!(matches!(
        auth.make_view(STUDENTS_DB, "no_such_table"),
        Err(Error::UnknownTable(_))
    ));
    assert!(matches!(
        auth.make_view("elsewhere.db", "students"),
        Err(Error::UnknownDatabase(_))
    ));
    let one = auth.make_view(STUDENTS_DB, "students").unwrap();
    let two = auth.make_view(STUDENTS_DB, "students").unwrap();
    assert_eq!(one.fetch().unwrap(), two.fetch().unwrap());
}

#[test]
fn derivations_do_not_touch_the_engine() {
    let (auth, conn) = students();
    let s = auth.make_view(STUDENTS_DB, "students").unwrap();
    let a = auth.make_view(STUDENTS_DB, "advising").unwrap();
    let before = conn.statement_count();
    let v = s
        .filter("gpa > 1")
        .unwrap()
        .join(&a, Some("id = student"))
        .unwrap()
        .select("name, advisor")
        .unwrap()
        .aggregate("COUNT(*)")
        .unwrap();
    assert_eq!(conn.statement_count(), before);
    assert_eq!(v.fetch().unwrap().rows, vec![vec![SqlValue::Integer(3)]]);
    assert_eq!(conn.statement_count(), before + 1);
}

#[test]
fn selections_and_projections() {
    let (auth, _) = students();
    let s = auth.make_view(STUDENTS_DB, "students").unwrap();
    let low = s.filter("gpa <= 2.5").unwrap().fetch().unwrap();
    assert_eq!(low.len(), 1);
    assert_eq!(low.rows[0][1], SqlValue::Text("Mike Birbiglia".into()));
    assert_eq!(s.filter("1 = 1").unwrap().fetch().unwrap(), s.fetch().unwrap());
    let full = s.select("id, name, email, gpa").unwrap();
    assert_eq!(full.schema().names(), s.schema().names());
    let scaled = s.select("name, gpa * 10").unwrap().fetch().unwrap();
    assert_eq!(scaled.columns, vec!["name", "(gpa*10)"]);
    assert!(matches!(s.select("name AS n"), Err(Error::AliasNotSupported(_))));
    assert!(matches!(s.filter("nope = 1"), Err(Error::UnknownColumn(_))));
}

#[test]
fn joins_and_aggregates_admit_no_writes() {
    let (auth, _) = students();
    let s = auth.make_view(STUDENTS_DB, "students").unwrap();
    let a = auth.make_view(STUDENTS_DB, "advising").unwrap();
    let joined = s.join(&a, Some("id = student")).unwrap();
    assert_eq!(joined.schema().len(), 6);
    assert!(matches!(joined.update("gpa = 4.0", None), Err(Error::NotUpdatable(_))));
    assert!(matches!(joined.delete(None), Err(Error::NotDeletable)));
    let count = s.aggregate("COUNT(*)").unwrap();
    assert!(matches!(count.delete(None), Err(Error::NotDeletable)));
    assert!(matches!(
        count.insert(&["COUNT(*)"], vec![vec![1.into()]]),
        Err(Error::NotInsertable) | Err(Error::NotUpdatable(_))
    ));
    let empty = s.filter("1 = 0").unwrap().aggregate("COUNT(*)").unwrap();
    assert_eq!(empty.fetch().unwrap().rows, vec![vec![SqlValue::Integer(0)]]);
}

#[test]
fn grouped_aggregates_with_having() {
    let (auth, _) = students();
    let a = auth.make_view(STUDENTS_DB, "advising").unwrap();
    let spec = viewcap::AggregateSpec::parse("advisor, COUNT(*)")
        .unwrap()
        .group_by("advisor")
        .unwrap()
        .having("COUNT(*) > 1")
        .unwrap();
    let rows = a.aggregate_with(spec).unwrap().fetch().unwrap();
    assert_eq!(
        rows.rows,
        vec![vec![SqlValue::Text("Jerome Seinfeld".into()), SqlValue::Integer(2)]]
    );
}

#[test]
fn deletes_respect_the_view() {
    let (auth, conn) = students();
    let s = auth.make_view(STUDENTS_DB, "students").unwrap();
    assert_eq!(s.filter("1 = 0").unwrap().delete(None).unwrap(), 0);
    assert_eq!(s.filter("gpa > 3").unwrap().delete(Some("id = 3")).unwrap(), 1);
    let left = conn.query("SELECT id FROM students ORDER BY id", &[]).unwrap();
    assert_eq!(left.rows, vec![vec![SqlValue::Integer(1)], vec![SqlValue::Integer(2)]]);
}

#[test]
fn writes_through_a_projection_hiding_the_predicate_fail() {
    let (auth, _) = students();
    let hidden = auth
        .make_view(STUDENTS_DB, "students")
        .unwrap()
        .filter("gpa > 3")
        .unwrap()
        .select("id, name")
        .unwrap();
    assert!(matches!(hidden.delete(None), Err(Error::UnknownColumn(_))));
    assert!(matches!(hidden.update("name = 'x'", None), Err(Error::UnknownColumn(_))));
    let visible = auth
        .make_view(STUDENTS_DB, "students")
        .unwrap()
        .filter("gpa > 3")
        .unwrap()
        .select("id, gpa")
        .unwrap();
    assert_eq!(visible.delete(Some("id = 2")).unwrap(), 1);
}

#[test]
fn inserts_must_satisfy_the_view() {
    let (auth, conn) = students();
    let s = auth.make_view(STUDENTS_DB, "students").unwrap();
    let honors = s.filter("gpa >= 3.5").unwrap();
    let cols = ["name", "email", "gpa"];
    let err = honors
        .insert(&cols, vec![vec!["Ali Wong".into(), "awong@college.edu".into(), 3.0.into()]])
        .unwrap_err();
    assert_eq!(err.to_string(), "insert: violated view constraint: gpa >= 3.5");
    assert_eq!(
        honors
            .insert(&cols, vec![vec!["Ali Wong".into(), "awong@college.edu".into(), 3.8.into()]])
            .unwrap(),
        1
    );
    assert_eq!(
        s.insert(&cols, vec![vec!["Bo Burnham".into(), "bb@college.edu".into(), 1.0.into()]])
            .unwrap(),
        1
    );
    assert_eq!(conn.query("SELECT * FROM students", &[]).unwrap().len(), 5);
    let narrow = s.select("name, gpa").unwrap();
    assert!(matches!(
        narrow.insert(&["name", "gpa"], vec![vec!["X".into(), 1.0.into()]]),
        Err(Error::NotInsertable)
    ));
}

#[test]
fn updates_may_leave_the_per_operation_scope() {
    let (auth, conn) = students();
    let s = auth.make_view(STUDENTS_DB, "students").unwrap();
    let passing = s.filter("gpa >= 2").unwrap();
    assert_eq!(passing.update("gpa = gpa + 1", Some("gpa < 3")).unwrap(), 1);
    let g = conn.query("SELECT gpa FROM students WHERE id = 1", &[]).unwrap();
    assert_eq!(g.rows, vec![vec![SqlValue::Real(3.5)]]);
    assert!(matches!(
        passing.update("name = 'a', name = 'b'", None),
        Err(Error::DuplicateAssignment(_))
    ));
}
