//! Preference-aware retrieval over fuzzy knowledge bases.
//!
//! The pipeline has three persisted stages:
//!
//! 1. [`kb`]: numeric attributes of a table are segmented into labelled fuzzy
//!    regions with fuzzy c-means, giving a membership degree for every record
//!    and region.
//! 2. [`query`]: a preference query is parsed into a CP-Net ([`cpnet`]),
//!    weighted into a UCP-Net ([`ucp`]) and rewritten as a disjunction of
//!    conjunctive terms, each with an importance `U_k`.
//! 3. [`eval`]: records are projected onto the query's variables and ranked
//!    by `max_k min(S_k, U_k)`.

pub mod cli;
pub mod cpnet;
pub mod error;
pub mod eval;
pub mod kb;
pub mod query;
pub mod ucp;

pub use error::{Error, Result};

/// Version stamped into every persisted JSON document.
pub const FORMAT_VERSION: u32 = 1;
