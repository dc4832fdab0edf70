use proptest::prelude::*;
use viewcap_testkit::cases::{fetch_case, write_case};
use viewcap_testkit::gen::{random_db, Gen};
use viewcap_testkit::oracle::{canonical, eval_query};

#[test]
fn fetches_agree_with_the_oracle() {
    let failures: Vec<String> = (0..400).filter_map(|s| fetch_case(s).err()).collect();
    assert!(failures.is_empty(), "{} failures, first:\n{}", failures.len(), failures[0]);
}

#[test]
fn writes_agree_with_the_oracle() {
    let failures: Vec<String> = (0..400).filter_map(|s| write_case(s).err()).collect();
    assert!(failures.is_empty(), "{} failures, first:\n{}", failures.len(), failures[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn filtering_yields_a_subset(seed in any::<u64>()) {
        let rdb = random_db(seed, 12);
        let mut g = Gen::new(seed);
        let (v, cols) = g.view(&rdb);
        let p = g.predicate(&cols, 3);
        let all = canonical(v.fetch().unwrap().rows);
        let some = canonical(v.filter(p).unwrap().fetch().unwrap().rows);
        let mut pool = all.clone();
        for row in &some {
            let i = pool.iter().position(|r| r == row);
            prop_assert!(i.is_some(), "{row:?} not in {all:?}");
            pool.remove(i.unwrap());
        }
    }

    #[test]
    fn projection_is_rowwise(seed in any::<u64>()) {
        let rdb = random_db(seed, 12);
        let mut g = Gen::new(seed ^ 7);
        let (v, cols) = g.view(&rdb);
        let (items, _) = g.projection(&cols);
        let projected = v.select(items).unwrap();
        prop_assert_eq!(projected.fetch().unwrap().len(), v.fetch().unwrap().len());
        prop_assert_eq!(
            canonical(projected.fetch().unwrap().rows),
            canonical(eval_query(projected.ast(), &rdb.db))
        );
    }

    #[test]
    fn random_writes_match(seed in any::<u64>()) {
        prop_assert_eq!(write_case(seed), Ok(()));
    }

    #[test]
    fn random_fetches_match(seed in any::<u64>()) {
        prop_assert_eq!(fetch_case(seed), Ok(()));
    }
}
