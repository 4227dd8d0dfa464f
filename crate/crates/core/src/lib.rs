//! Max-min weighted SINR transceivers for the multi-user MISO downlink and its
//! dual uplink under imperfect CSI: the exact optimal design, its large-system
//! deterministic equivalents, and a truncated polynomial expansion of it.

pub mod asymptotic;
pub mod channel;
pub mod error;
pub mod exact;
pub mod harness;
pub mod jet;
pub mod linalg;
pub mod tpe;

pub use error::{Error, Result};

/// Which direction of the link a SINR refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Downlink,
    Uplink,
}
