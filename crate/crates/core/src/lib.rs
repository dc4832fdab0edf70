//! Capability-mediated access to SQLite views, with contracts that limit
//! what a component may do with the views it is given.
//!
//! Entry code mints base views through a [`RootAuthority`]; components
//! receive [`ViewValue`]s, derive narrower views with `filter`, `select`,
//! `join` and `aggregate`, and touch the engine only through `fetch`,
//! `update`, `delete` and `insert`. Contracts wrap views in layers that
//! check each operation and rewrite its query.
//!
//! ```
//! use viewcap::{Connection, RootAuthority};
//!
//! let conn = Connection::open_in_memory().unwrap();
//! conn.execute_batch(
//!     "CREATE TABLE students (id INTEGER PRIMARY KEY, name TEXT, gpa REAL);
//!      INSERT INTO students VALUES (1, 'Ann', 2.5), (2, 'Bo', 3.9);",
//! )
//! .unwrap();
//! let auth = RootAuthority::with_connection("school", conn);
//! let students = auth.make_view("school", "students").unwrap();
//! let low = students.filter("gpa <= 2.5").unwrap();
//! assert_eq!(low.fetch().unwrap().len(), 1);
//! assert!(low.update("gpa = 3.7", None).is_err());
//! ```

pub mod authority;
pub mod backend;
pub mod capability;
pub mod contract;
pub mod error;
pub mod query;
pub mod sql;

pub use authority::{current_user, with_user, RootAuthority};
pub use backend::{CheckTrigger, Connection, DmlOutcome, RowSet};
pub use capability::{AggregateSpec, ViewCapability, ViewValue};
pub use contract::{
    define_contracted, guard, valid_foreign_key, ArgContract, BlameLabel, ContractViolation,
    ContractedFn, FunctionContract, GroupDef, GuardedView, Modifier, Position, Privilege, Value,
    ViewContract,
};
pub use error::{DmlKind, Error, Result};
pub use query::{QueryAst, Validation, ViewSchema};
pub use sql::{sqlformat, Expr, Ident, SqlValue};
