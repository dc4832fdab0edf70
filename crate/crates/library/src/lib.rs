//! A lending-library reservation backend. Its five endpoints are
//! contracted functions over view capabilities: a body only ever sees the
//! reservations its caller may see, whatever the body itself does.
//!
//! ```
//! use library::{fixture, service::{ContractedService, Service}};
//!
//! let auth = fixture::in_memory().unwrap();
//! let svc = ContractedService::new().unwrap();
//! assert_eq!(svc.my_reservations(&auth, 1).unwrap(), "");
//! assert_eq!(svc.num_reservations(&auth, 1, "2").unwrap(), "1");
//! ```

pub mod endpoints;
pub mod fixture;
pub mod http;
pub mod service;

pub use service::{by_name, card_id, CapabilityService, ContractedService, DirectSql, Service, REGISTRY};
