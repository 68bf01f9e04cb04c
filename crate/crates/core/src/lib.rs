//! mechlab-core: exact desk-scale computation and verification for
//! revenue-maximizing mechanisms with unit-demand buyers.
//!
//! The crate covers:
//! - exact domain model and buyer best responses ([`model`]),
//! - buy-many constraint checking, closures and the Lagrangian profit
//!   machinery over derived item pricings ([`buymany`]),
//! - an exact rational LP solver with verified certificates ([`lp`]),
//! - exact item-pricing oracles, ex-ante constrained revenue and convex
//!   decomposition of allocation targets ([`opt`]),
//! - sequential item pricing with availability dynamics, construction of
//!   half-of-ex-ante pricings and derandomization ([`sequential`]),
//! - instance generators and file formats ([`instances`]).

pub mod buymany;
pub mod instances;
pub mod lp;
pub mod model;
pub mod opt;
pub mod rational;
pub mod sequential;

pub use model::*;
pub use rational::{Price, Rational};

/// Library version embedded in CSV outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
