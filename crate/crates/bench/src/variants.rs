//! The four implementations compared by the workloads, selected by name.

use library::{CapabilityService, ContractedService, DirectSql, Service};
use viewcap::{Connection, Result};

pub trait Variant: Send + Sync {
    fn name(&self) -> &'static str;
    fn service(&self) -> &dyn Service;
    /// Prepares a fresh connection before a repetition.
    fn configure(&self, _conn: &Connection) {}
}

pub struct BaselineDirectSql(DirectSql);

impl Variant for BaselineDirectSql {
    fn name(&self) -> &'static str {
        "baseline"
    }
    fn service(&self) -> &dyn Service {
        &self.0
    }
}

pub struct CapqlNoTriggers(CapabilityService);

impl Variant for CapqlNoTriggers {
    fn name(&self) -> &'static str {
        "capql-no-triggers"
    }
    fn service(&self) -> &dyn Service {
        &self.0
    }
    fn configure(&self, conn: &Connection) {
        conn.set_check_enforcement(false);
    }
}

pub struct CapqlWithTriggers(CapabilityService);

impl Variant for CapqlWithTriggers {
    fn name(&self) -> &'static str {
        "capql"
    }
    fn service(&self) -> &dyn Service {
        &self.0
    }
}

pub struct FullContracts(ContractedService);

impl Variant for FullContracts {
    fn name(&self) -> &'static str {
        "contracts"
    }
    fn service(&self) -> &dyn Service {
        &self.0
    }
}

type Constructor = fn() -> Result<Box<dyn Variant>>;

pub const VARIANTS: [(&str, Constructor); 4] = [
    ("baseline", || Ok(Box::new(BaselineDirectSql(DirectSql)))),
    ("capql-no-triggers", || Ok(Box::new(CapqlNoTriggers(CapabilityService)))),
    ("capql", || Ok(Box::new(CapqlWithTriggers(CapabilityService)))),
    ("contracts", || Ok(Box::new(FullContracts(ContractedService::new()?)))),
];

pub fn names() -> Vec<&'static str> {
    VARIANTS.iter().map(|(n, _)| *n).collect()
}

pub fn by_name(name: &str) -> Option<Result<Box<dyn Variant>>> {
    VARIANTS.iter().find(|(n, _)| *n == name).map(|(_, make)| make())
}
