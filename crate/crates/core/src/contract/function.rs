use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use super::guard::{guard_layer, JoinGroup};
use super::{BlameLabel, ContractViolation, Modifier, Position, ViewContract};
use crate::backend::RowSet;
use crate::capability::ViewValue;
use crate::error::{Error, Result};

/// Values crossing a contracted-function boundary.
#[derive(Clone, Debug)]
pub enum Value {
    View(ViewValue),
    Text(String),
    Integer(i64),
    Rows(RowSet),
    Unit,
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::View(_) => "view",
            Value::Text(_) => "string",
            Value::Integer(_) => "integer",
            Value::Rows(_) => "rows",
            Value::Unit => "unit",
        }
    }

    pub fn as_view(&self) -> Option<&ViewValue> {
        match self {
            Value::View(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl From<ViewValue> for Value {
    fn from(v: ViewValue) -> Self {
        Value::View(v)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

/// Contract on one argument or on the result.
#[derive(Clone, Debug)]
pub enum ArgContract {
    Any,
    String,
    Integer,
    View {
        contract: Arc<ViewContract>,
        groups: Vec<String>,
    },
}

impl ArgContract {
    pub fn view(contract: ViewContract) -> ArgContract {
        ArgContract::View {
            contract: Arc::new(contract),
            groups: Vec::new(),
        }
    }

    /// Attach join-group memberships; only meaningful on arguments.
    pub fn in_groups(self, names: &[&str]) -> ArgContract {
        match self {
            ArgContract::View { contract, mut groups } => {
                groups.extend(names.iter().map(|n| n.to_string()));
                ArgContract::View { contract, groups }
            }
            other => other,
        }
    }
}

/// A join group definition; its modifiers must be `#:pre`, `#:post` or
/// `#:with`.
#[derive(Clone, Debug)]
pub struct GroupDef {
    pub name: String,
    pub modifiers: Vec<Modifier>,
}

impl GroupDef {
    pub fn new(name: impl Into<String>, modifiers: Vec<Modifier>) -> GroupDef {
        GroupDef {
            name: name.into(),
            modifiers,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FunctionContract {
    pub groups: Vec<GroupDef>,
    pub args: Vec<ArgContract>,
    pub result: ArgContract,
}

impl FunctionContract {
    pub fn new(args: Vec<ArgContract>, result: ArgContract) -> FunctionContract {
        FunctionContract {
            groups: Vec::new(),
            args,
            result,
        }
    }

    pub fn group(mut self, def: GroupDef) -> FunctionContract {
        self.groups.push(def);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for g in &self.groups {
            if !names.insert(g.name.as_str()) {
                return Err(Error::MalformedContract(format!("join group {} defined twice", g.name)));
            }
            let mut withs = 0;
            for m in &g.modifiers {
                match m {
                    Modifier::Pre(_) | Modifier::Post(_) => {}
                    Modifier::With(c) => {
                        withs += 1;
                        c.validate()?;
                    }
                    other => {
                        return Err(Error::MalformedContract(format!(
                            "{} cannot modify join group {}",
                            other.keyword(),
                            g.name
                        )))
                    }
                }
            }
            if withs > 1 {
                return Err(Error::MalformedContract(format!("join group {} has more than one #:with", g.name)));
            }
        }
        let with_groups: BTreeSet<&str> = self
            .groups
            .iter()
            .filter(|g| g.modifiers.iter().any(|m| matches!(m, Modifier::With(_))))
            .map(|g| g.name.as_str())
            .collect();
        let mut memberships = Vec::new();
        for a in self.args.iter().chain(std::iter::once(&self.result)) {
            if let ArgContract::View { contract, groups } = a {
                contract.validate()?;
                for g in groups {
                    if !names.contains(g.as_str()) {
                        return Err(Error::MalformedContract(format!("undefined join group {g}")));
                    }
                }
                memberships.push(groups.iter().map(String::as_str).collect::<BTreeSet<_>>());
            }
        }
        if matches!(&self.result, ArgContract::View { groups, .. } if !groups.is_empty()) {
            return Err(Error::MalformedContract("the result cannot join a group".into()));
        }
        for (i, a) in memberships.iter().enumerate() {
            for b in &memberships[i + 1..] {
                let ambiguous = a.intersection(b).filter(|g| with_groups.contains(*g)).count();
                if ambiguous > 1 {
                    return Err(Error::MalformedContract(
                        "two arguments share more than one join group with #:with".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

type Body = Arc<dyn Fn(&[Value]) -> Result<Value> + Send + Sync>;

/// A function whose arguments and result are checked against a
/// [`FunctionContract`] on every application.
#[derive(Clone)]
pub struct ContractedFn {
    component: String,
    name: String,
    contract: Arc<FunctionContract>,
    body: Body,
}

impl fmt::Debug for ContractedFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContractedFn")
            .field("component", &self.component)
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

/// Attach `contract` to `body`. Blame labels name `component` and `name`.
pub fn define_contracted(
    component: impl Into<String>,
    name: impl Into<String>,
    contract: FunctionContract,
    body: impl Fn(&[Value]) -> Result<Value> + Send + Sync + 'static,
) -> Result<ContractedFn> {
    contract.validate()?;
    Ok(ContractedFn {
        component: component.into(),
        name: name.into(),
        contract: Arc::new(contract),
        body: Arc::new(body),
    })
}

impl ContractedFn {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn contract(&self) -> &FunctionContract {
        &self.contract
    }

    fn blame(&self, position: Position) -> BlameLabel {
        BlameLabel::new(&self.component, &self.name, position)
    }

    pub fn call(&self, args: Vec<Value>) -> Result<Value> {
        let fc = &self.contract;
        if args.len() != fc.args.len() {
            return Err(Error::ArityMismatch {
                expected: fc.args.len(),
                actual: args.len(),
            });
        }
        let groups: Vec<Arc<JoinGroup>> = fc
            .groups
            .iter()
            .enumerate()
            .map(|(i, g)| {
                Arc::new(JoinGroup::new(
                    g.name.clone(),
                    i,
                    &g.modifiers,
                    self.blame(Position::Group(g.name.clone())),
                ))
            })
            .collect();
        let mut checked = Vec::with_capacity(args.len());
        for (i, (arg, c)) in args.into_iter().zip(&fc.args).enumerate() {
            checked.push(self.apply(arg, c, Position::Argument(i + 1), &groups)?);
        }
        let out = (self.body)(&checked)?;
        self.apply(out, &fc.result, Position::Result, &[])
    }

    fn apply(&self, v: Value, c: &ArgContract, position: Position, all: &[Arc<JoinGroup>]) -> Result<Value> {
        let fail = |expected: &str, got: &Value| -> Error {
            ContractViolation::new(
                &self.blame(position.clone()),
                None,
                format!("expected {expected}, given a {}", got.kind()),
            )
            .into()
        };
        match c {
            ArgContract::Any => Ok(v),
            ArgContract::String => match v {
                Value::Text(_) => Ok(v),
                other => Err(fail("string?", &other)),
            },
            ArgContract::Integer => match v {
                Value::Integer(_) => Ok(v),
                other => Err(fail("integer?", &other)),
            },
            ArgContract::View { contract, groups } => {
                let Value::View(view) = v else {
                    return Err(fail("view/c", &v));
                };
                if contract.is_flat() && groups.is_empty() {
                    return Ok(Value::View(view));
                }
                let members = all
                    .iter()
                    .filter(|g| groups.iter().any(|n| *n == g.name))
                    .cloned()
                    .collect();
                Ok(Value::View(guard_layer(&view, contract.clone(), self.blame(position), members)))
            }
        }
    }
}
