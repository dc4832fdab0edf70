//! View contracts: privileges, modifiers, guarded views, join groups and
//! contracted functions.
//!
//! A contract is a value. Guarding a view with a non-empty contract adds a
//! layer; every operation on the result is checked against every layer,
//! outermost first, and a violation blames the function boundary that
//! installed the failing layer.

mod function;
mod guard;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

pub use function::{define_contracted, ArgContract, ContractedFn, FunctionContract, GroupDef, Value};
pub use guard::{guard, GuardedView, JoinGroup};
pub(crate) use guard::{aggregate, join, through_layers};

use crate::capability::ViewValue;
use crate::error::{Error, Result};
use crate::query::Origin;
use crate::sql::{parse_column_list, parse_having, AggFunc, BinaryOp, Expr, Ident};

/// One entry per view operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Privilege {
    Fetch,
    Update,
    Delete,
    Insert,
    Where,
    Select,
    Aggregate,
    Join,
}

impl Privilege {
    pub const ALL: [Privilege; 8] = [
        Privilege::Fetch,
        Privilege::Update,
        Privilege::Delete,
        Privilege::Insert,
        Privilege::Where,
        Privilege::Select,
        Privilege::Aggregate,
        Privilege::Join,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Privilege::Fetch => "+fetch",
            Privilege::Update => "+update",
            Privilege::Delete => "+delete",
            Privilege::Insert => "+insert",
            Privilege::Where => "+where",
            Privilege::Select => "+select",
            Privilege::Aggregate => "+aggregate",
            Privilege::Join => "+join",
        }
    }
}

impl fmt::Display for Privilege {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A view-to-view function run with the raw capability's authority.
pub type ViewTransform = Arc<dyn Fn(&ViewValue) -> Result<ViewValue> + Send + Sync>;

/// Decides whether a join of `(left, right, clause)` may proceed.
pub type JoinPredicate = Arc<dyn Fn(&ViewValue, &ViewValue, Option<&Expr>) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum Modifier {
    Restrict(ViewTransform),
    Prohibit(BTreeSet<Ident>),
    Aggrs(BTreeSet<AggFunc>),
    Having(Expr),
    With(Arc<ViewContract>),
    Pre(JoinPredicate),
    Post(ViewTransform),
}

impl fmt::Debug for Modifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modifier::Restrict(_) => f.write_str("#:restrict"),
            Modifier::Prohibit(c) => write!(f, "#:prohibit {c:?}"),
            Modifier::Aggrs(a) => write!(f, "#:aggrs {a:?}"),
            Modifier::Having(h) => write!(f, "#:having {h}"),
            Modifier::With(c) => write!(f, "#:with {c:?}"),
            Modifier::Pre(_) => f.write_str("#:pre"),
            Modifier::Post(_) => f.write_str("#:post"),
        }
    }
}

impl Modifier {
    pub fn restrict(f: impl Fn(&ViewValue) -> Result<ViewValue> + Send + Sync + 'static) -> Modifier {
        Modifier::Restrict(Arc::new(f))
    }

    /// Restrict to the rows satisfying a fixed clause.
    pub fn restrict_where(clause: &str) -> Result<Modifier> {
        let pred = crate::sql::parse_predicate(clause)?;
        Ok(Modifier::restrict(move |v| v.filter(&pred)))
    }

    /// Restrict to a fixed projection.
    pub fn restrict_select(items: &str) -> Result<Modifier> {
        let items = crate::sql::parse_select_list(items)?;
        Ok(Modifier::restrict(move |v| v.select(items.clone())))
    }

    /// `columns` is a comma-separated list.
    pub fn prohibit(columns: &str) -> Result<Modifier> {
        Ok(Modifier::Prohibit(parse_column_list(columns)?.into_iter().collect()))
    }

    pub fn aggrs(funcs: impl IntoIterator<Item = AggFunc>) -> Modifier {
        Modifier::Aggrs(funcs.into_iter().collect())
    }

    /// Parse a comma-separated list of aggregate function names.
    pub fn aggrs_named(names: &str) -> Result<Modifier> {
        let mut out = BTreeSet::new();
        for n in names.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            let f = AggFunc::from_name(n)
                .ok_or_else(|| Error::MalformedContract(format!("unknown aggregate function `{n}`")))?;
            out.insert(f);
        }
        Ok(Modifier::Aggrs(out))
    }

    pub fn having(clause: &str) -> Result<Modifier> {
        Ok(Modifier::Having(parse_having(clause)?))
    }

    pub fn with(contract: ViewContract) -> Modifier {
        Modifier::With(Arc::new(contract))
    }

    pub fn pre(f: impl Fn(&ViewValue, &ViewValue, Option<&Expr>) -> bool + Send + Sync + 'static) -> Modifier {
        Modifier::Pre(Arc::new(f))
    }

    pub fn post(f: impl Fn(&ViewValue) -> Result<ViewValue> + Send + Sync + 'static) -> Modifier {
        Modifier::Post(Arc::new(f))
    }

    fn keyword(&self) -> &'static str {
        match self {
            Modifier::Restrict(_) => "#:restrict",
            Modifier::Prohibit(_) => "#:prohibit",
            Modifier::Aggrs(_) => "#:aggrs",
            Modifier::Having(_) => "#:having",
            Modifier::With(_) => "#:with",
            Modifier::Pre(_) => "#:pre",
            Modifier::Post(_) => "#:post",
        }
    }

    fn allowed_on(&self, p: Privilege) -> bool {
        use Privilege::*;
        match self {
            Modifier::Restrict(_) => matches!(p, Fetch | Update | Delete | Insert),
            Modifier::Prohibit(_) => p == Where,
            Modifier::Aggrs(_) | Modifier::Having(_) => p == Aggregate,
            Modifier::With(_) => matches!(p, Aggregate | Join),
            Modifier::Pre(_) | Modifier::Post(_) => p == Join,
        }
    }
}

/// Privileges a guarded view grants, each with its modifiers. Privileges not
/// listed are denied.
#[derive(Clone, Debug, Default)]
pub struct ViewContract {
    privileges: BTreeMap<Privilege, Vec<Modifier>>,
}

impl ViewContract {
    /// The empty contract: only checks that a value is a view.
    pub fn new() -> ViewContract {
        ViewContract::default()
    }

    pub fn permitting(privileges: &[Privilege]) -> ViewContract {
        privileges.iter().fold(ViewContract::new(), |c, p| c.grant(*p))
    }

    pub fn grant(self, p: Privilege) -> ViewContract {
        self.grant_with(p, Vec::new())
    }

    pub fn grant_with(mut self, p: Privilege, modifiers: Vec<Modifier>) -> ViewContract {
        self.privileges.entry(p).or_default().extend(modifiers);
        self
    }

    /// No privileges listed: guarding with it performs no wrapping.
    pub fn is_flat(&self) -> bool {
        self.privileges.is_empty()
    }

    pub fn permits(&self, p: Privilege) -> bool {
        self.privileges.contains_key(&p)
    }

    pub fn modifiers(&self, p: Privilege) -> Option<&[Modifier]> {
        self.privileges.get(&p).map(Vec::as_slice)
    }

    pub fn privileges(&self) -> impl Iterator<Item = Privilege> + '_ {
        self.privileges.keys().copied()
    }

    /// Checks modifier placement and `#:with` uniqueness, recursively.
    pub fn validate(&self) -> Result<()> {
        for (p, mods) in &self.privileges {
            let mut withs = 0;
            for m in mods {
                if !m.allowed_on(*p) {
                    return Err(Error::MalformedContract(format!(
                        "{} cannot modify {p}",
                        m.keyword()
                    )));
                }
                if let Modifier::With(c) = m {
                    withs += 1;
                    c.validate()?;
                }
            }
            if withs > 1 {
                return Err(Error::MalformedContract(format!("{p} has more than one #:with")));
            }
        }
        Ok(())
    }
}

/// Where a contract was attached.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Position {
    Argument(usize),
    Result,
    Group(String),
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Argument(i) => write!(f, "argument {i}"),
            Position::Result => f.write_str("result"),
            Position::Group(g) => write!(f, "join group {g}"),
        }
    }
}

/// Names the party responsible for honoring a contract: the contracted
/// function and the position whose contract was breached.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BlameLabel {
    pub component: String,
    pub function: String,
    pub position: Position,
}

impl BlameLabel {
    pub fn new(component: impl Into<String>, function: impl Into<String>, position: Position) -> BlameLabel {
        BlameLabel {
            component: component.into(),
            function: function.into(),
            position,
        }
    }
}

impl fmt::Display for BlameLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}) in {}", self.function, self.position, self.component)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("contract violation: {detail}; blaming {blame}")]
pub struct ContractViolation {
    pub blame: BlameLabel,
    /// `None` when a value failed a flat check at a function boundary.
    pub privilege: Option<Privilege>,
    pub detail: String,
}

impl ContractViolation {
    pub(crate) fn new(blame: &BlameLabel, privilege: Option<Privilege>, detail: impl Into<String>) -> ContractViolation {
        ContractViolation {
            blame: blame.clone(),
            privilege,
            detail: detail.into(),
        }
    }
}

/// A join precondition accepting only an equality between a foreign-key
/// column on one side and the column it references on the other.
pub fn valid_foreign_key() -> Modifier {
    Modifier::pre(|left, right, clause| is_foreign_key_join(left, right, clause))
}

pub fn is_foreign_key_join(left: &ViewValue, right: &ViewValue, clause: Option<&Expr>) -> bool {
    let Some(Expr::Binary(BinaryOp::Eq, a, b)) = clause else {
        return false;
    };
    let (Expr::Column(a), Expr::Column(b)) = (a.as_ref(), b.as_ref()) else {
        return false;
    };
    let refers = |from: &ViewValue, fk: &Ident, to: &ViewValue, pk: &Ident| {
        let (Some(f), Some(t)) = (from.schema().column(fk), to.schema().column(pk)) else {
            return false;
        };
        match (&f.references, &t.origin) {
            (Some((rt, rc)), Origin::Base { table, column }) => rt == table && rc == column,
            _ => false,
        }
    };
    refers(left, a, right, b)
        || refers(left, b, right, a)
        || refers(right, a, left, b)
        || refers(right, b, left, a)
}
