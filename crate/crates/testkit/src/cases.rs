//! Randomized engine-versus-oracle cases. Each returns `Err` with a
//! description on the first disagreement.

use rand::seq::SliceRandom;
use rand::Rng;

use viewcap::contract::guard;
use viewcap::query::Origin;
use viewcap::sql::{Assignment, Expr, Ident, SqlValue};
use viewcap::{BlameLabel, Error, Modifier, Position, Privilege, ViewContract, ViewValue};

use crate::gen::{random_db, Cols, Gen, Ty};
use crate::oracle::{
    canonical, eval_query, hides_predicate_columns, predict_delete, predict_insert, predict_update, Table,
};

fn blame() -> BlameLabel {
    BlameLabel::new("oracle", "case", Position::Argument(1))
}

fn describe(v: &ViewValue) -> String {
    viewcap::query::concretize(v.ast()).sql
}

/// A random view, optionally behind a random contract, fetched through the
/// engine and evaluated by the oracle.
pub fn fetch_case(seed: u64) -> Result<(), String> {
    let rdb = random_db(seed, 20);
    let mut g = Gen::new(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let (v, cols) = g.view(&rdb);
    let mode = g.rng.gen_range(0..4);
    let (target, effective) = match mode {
        0 => (v.clone(), v.clone()),
        1 => {
            let p = g.predicate(&cols, 4);
            let c = ViewContract::new()
                .grant(Privilege::Where)
                .grant_with(Privilege::Fetch, vec![restrict_where(p.clone())]);
            (guard(&v, c, blame()).map_err(|e| e.to_string())?, v.filter(p).map_err(|e| e.to_string())?)
        }
        2 => {
            let (items, _) = g.projection(&cols);
            let keep = items.clone();
            let c = ViewContract::new().grant_with(
                Privilege::Fetch,
                vec![Modifier::restrict(move |v| v.select(keep.clone()))],
            );
            (guard(&v, c, blame()).map_err(|e| e.to_string())?, v.select(items).map_err(|e| e.to_string())?)
        }
        _ => {
            let (prohibited, _) = cols.choose(&mut g.rng).unwrap().clone();
            let c = ViewContract::new()
                .grant(Privilege::Fetch)
                .grant_with(Privilege::Where, vec![Modifier::Prohibit([prohibited.clone()].into())]);
            let guarded = guard(&v, c, blame()).map_err(|e| e.to_string())?;
            let q = g.predicate(&cols, 3);
            let refused = q.mentions().contains(&prohibited);
            match guarded.filter(q.clone()) {
                Err(Error::Contract(_)) if refused => return Ok(()),
                Ok(filtered) if !refused => (filtered, v.filter(q).map_err(|e| e.to_string())?),
                other => {
                    return Err(format!(
                        "seed {seed}: prohibit {prohibited} on `{q}` gave {other:?}"
                    ))
                }
            }
        }
    };
    let got = target
        .fetch()
        .map_err(|e| format!("seed {seed}: fetch failed: {e}\n{}", describe(&effective)))?;
    let want = canonical(eval_query(effective.ast(), &rdb.db));
    let got = canonical(got.rows);
    if got != want {
        return Err(format!(
            "seed {seed}: engine and oracle disagree\n{}\nengine {got:?}\noracle {want:?}",
            describe(&effective)
        ));
    }
    Ok(())
}

fn restrict_where(p: Expr) -> Modifier {
    Modifier::restrict(move |v| v.filter(p.clone()))
}

fn writable(v: &ViewValue, cols: &Cols) -> Vec<(Ident, Ty)> {
    cols.iter()
        .filter(|(n, _)| {
            let info = v.schema().column(n).expect("visible");
            info.is_simple
                && matches!(&info.origin, Origin::Base { column, .. } if !column.matches("id"))
                && v.schema().resolve(n).is_ok()
        })
        .cloned()
        .collect()
}

fn same_table(got: &Table, want: &Table) -> bool {
    canonical(got.rows.clone()) == canonical(want.rows.clone())
}

/// A random write through a Where/Project chain over `t1`, possibly behind
/// a `#:restrict` layer, compared with the oracle's predicted table.
pub fn write_case(seed: u64) -> Result<(), String> {
    let rdb = random_db(seed, 20);
    let mut g = Gen::new(seed.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ 1);
    let (v, cols) = g.chain_view(&rdb);
    let before = rdb.load("t1");
    let writable = writable(&v, &cols);
    let mut op = g.rng.gen_range(0..3);
    if writable.is_empty() {
        op = 0;
    }
    let privilege = [Privilege::Delete, Privilege::Update, Privilege::Insert][op];
    let restrict = g.rng.gen_bool(0.3).then(|| g.predicate(&cols, 3));
    let (target, effective) = match &restrict {
        Some(p) => (
            guard(
                &v,
                ViewContract::new().grant_with(privilege, vec![restrict_where(p.clone())]),
                blame(),
            )
            .map_err(|e| e.to_string())?,
            v.filter(p.clone()).map_err(|e| e.to_string())?,
        ),
        None => (v.clone(), v.clone()),
    };
    let ast = effective.ast();
    let sql = describe(&effective);
    let scope = g.rng.gen_bool(0.5).then(|| g.predicate(&cols, 3));

    let (result, expected): (viewcap::Result<usize>, Result<Table, ()>) = match privilege {
        Privilege::Delete => {
            let r = target.delete_expr(scope.as_ref());
            let e = if hides_predicate_columns(ast) {
                Err(())
            } else {
                Ok(predict_delete(ast, scope.as_ref(), &before))
            };
            (r, e)
        }
        Privilege::Update => {
            let n = g.rng.gen_range(1..=writable.len().min(2));
            let targets: Vec<(Ident, Ty)> = writable.choose_multiple(&mut g.rng, n).cloned().collect();
            let set: Vec<(Ident, Expr)> = targets
                .into_iter()
                .map(|(c, ty)| {
                    let e = match ty {
                        Ty::Int => g.int_expr(&cols, 3),
                        Ty::Text => g.text_literal(),
                    };
                    (c, e)
                })
                .collect();
            let assignments: Vec<Assignment> = set
                .iter()
                .map(|(c, e)| Assignment {
                    column: c.clone(),
                    value: e.clone(),
                })
                .collect();
            let r = target.update_expr(&assignments, scope.as_ref());
            let e = if hides_predicate_columns(ast) {
                Err(())
            } else {
                predict_update(ast, &set, scope.as_ref(), &before)
            };
            (r, e)
        }
        _ => {
            let columns: Vec<Ident> = writable.iter().map(|(c, _)| c.clone()).collect();
            let rows: Vec<Vec<SqlValue>> = (0..g.rng.gen_range(1..=3))
                .map(|_| writable.iter().map(|(_, ty)| g.value(*ty)).collect())
                .collect();
            let r = target.insert_rows(&columns, &rows);
            (r, predict_insert(ast, &columns, &rows, &before, "id"))
        }
    };
    let after = rdb.load("t1");
    let leftovers = rdb.conn.temp_triggers().map_err(|e| e.to_string())?;
    if !leftovers.is_empty() {
        return Err(format!("seed {seed}: triggers left behind: {leftovers:?}"));
    }
    match (&result, &expected) {
        (Ok(n), Ok(want)) => {
            if !same_table(&after, want) {
                return Err(format!(
                    "seed {seed}: {privilege} through {sql}\nscope {scope:?}\nengine {:?}\noracle {:?}",
                    after.rows, want.rows
                ));
            }
            let changed = match privilege {
                Privilege::Delete => before.rows.len() - after.rows.len(),
                Privilege::Insert => after.rows.len() - before.rows.len(),
                _ => *n,
            };
            if changed != *n {
                return Err(format!("seed {seed}: {privilege} reported {n} rows, oracle {changed}"));
            }
            Ok(())
        }
        (Err(Error::ViewConstraintViolation { .. }), Err(()))
        | (Err(Error::UnknownColumn(_)), Err(())) => {
            if same_table(&after, &before) {
                Ok(())
            } else {
                Err(format!("seed {seed}: failed {privilege} changed the table"))
            }
        }
        _ => Err(format!(
            "seed {seed}: {privilege} through {sql}\nscope {scope:?}\nengine {result:?}\noracle {:?}",
            expected.as_ref().map(|t| t.rows.len())
        )),
    }
}
