use viewcap_testkit::triggers::{concurrent_insert, trigger_hygiene};

#[test]
fn a_thousand_guarded_writes_leave_no_triggers() {
    let h = trigger_hygiene(1000, 7).unwrap();
    assert_eq!(h.succeeded + h.rejected + h.engine_errors, 1000);
    assert!(h.succeeded > 0 && h.rejected > 0 && h.engine_errors > 0, "{h:?}");
}

#[test]
fn checks_are_private_to_their_connection() {
    let dir = tempfile::tempdir().unwrap();
    concurrent_insert(dir.path()).unwrap();
}
