//! The trusted entry boundary: minting capabilities and the current user.
//!
//! Entry code holds a [`RootAuthority`] built from explicit configuration and
//! hands components only [`ViewValue`]s. Nothing reachable from a view, a
//! row set or an error leads back to the authority.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Deserialize;

use crate::backend::Connection;
use crate::capability::{ViewCapability, ViewValue};
use crate::error::{Error, Result};
use crate::query::QueryAst;
use crate::sql::Ident;

#[derive(Debug, Deserialize)]
struct Config {
    databases: BTreeMap<String, PathBuf>,
}

/// Authority to open the configured databases and mint base views.
pub struct RootAuthority {
    databases: BTreeMap<String, PathBuf>,
    open: Mutex<BTreeMap<String, Connection>>,
}

impl std::fmt::Debug for RootAuthority {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RootAuthority")
            .field("databases", &self.databases.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl RootAuthority {
    /// Database names mapped to file paths.
    pub fn new(databases: impl IntoIterator<Item = (String, PathBuf)>) -> RootAuthority {
        RootAuthority {
            databases: databases.into_iter().collect(),
            open: Mutex::new(BTreeMap::new()),
        }
    }

    /// Parse a TOML config with a `[databases]` table of `name = "path"`.
    /// Relative paths are resolved against `base_dir`.
    pub fn from_config_str(text: &str, base_dir: &Path) -> Result<RootAuthority> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Io(format!("config: {e}")))?;
        Ok(RootAuthority::new(cfg.databases.into_iter().map(|(name, p)| {
            let p = if p.is_relative() && p.as_os_str() != ":memory:" {
                base_dir.join(p)
            } else {
                p
            };
            (name, p)
        })))
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<RootAuthority> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        RootAuthority::from_config_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// An authority over a single already-open connection, named `db`.
    pub fn with_connection(db: impl Into<String>, conn: Connection) -> RootAuthority {
        let db = db.into();
        let auth = RootAuthority::new(std::iter::empty());
        auth.open.lock().unwrap_or_else(|e| e.into_inner()).insert(db, conn);
        auth
    }

    /// A sibling authority over the same configuration that opens its own
    /// connections.
    pub fn session(&self) -> RootAuthority {
        RootAuthority::new(self.databases.clone())
    }

    pub fn database_names(&self) -> Vec<String> {
        let open = self.open.lock().unwrap_or_else(|e| e.into_inner());
        let mut names: Vec<String> = self.databases.keys().chain(open.keys()).cloned().collect();
        names.sort();
        names.dedup();
        names
    }

    /// The connection for `db`, opened on first use.
    pub fn connection(&self, db: &str) -> Result<Connection> {
        let mut open = self.open.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(c) = open.get(db) {
            return Ok(c.clone());
        }
        let path = self
            .databases
            .get(db)
            .ok_or_else(|| Error::UnknownDatabase(db.to_string()))?;
        let conn = Connection::open(path)?;
        open.insert(db.to_string(), conn.clone());
        Ok(conn)
    }

    /// A capability over all of `table`, like `SELECT * FROM table`.
    pub fn make_view(&self, db: &str, table: &str) -> Result<ViewValue> {
        let conn = self.connection(db)?;
        let schema = conn.table_schema(table)?;
        let ast = QueryAst::base(Ident::new(table), schema);
        Ok(ViewValue::Raw(ViewCapability::new(ast, conn)))
    }
}

thread_local! {
    static USERS: RefCell<Vec<String>> = const { RefCell::new(Vec::new()) };
}

struct Pop;

impl Drop for Pop {
    fn drop(&mut self) {
        USERS.with(|u| u.borrow_mut().pop());
    }
}

/// Run `body` with `user` as the current user of this thread.
pub fn with_user<T>(user: impl Into<String>, body: impl FnOnce() -> T) -> T {
    USERS.with(|u| u.borrow_mut().push(user.into()));
    let _pop = Pop;
    body()
}

/// The innermost user established by [`with_user`].
pub fn current_user() -> Result<String> {
    USERS.with(|u| u.borrow().last().cloned()).ok_or(Error::NoUserContext)
}
