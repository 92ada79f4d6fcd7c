//! Building blocks for privacy-preserving forwarding-loop detection between
//! software-defined exchanges.
//!
//! * [`rulespace`]: ternary match rules and the plaintext overlap oracle.
//! * [`circuits`]: boolean circuits comparing rules and mapping results to
//!   next-hop identifiers.
//! * [`smpc`]: two-party secure evaluation of those circuits (GMW and
//!   garbled circuits).
//! * [`distinct_match`]: the query primitive that tells a querier which
//!   next hops a remote rule table would produce for overlapping traffic,
//!   and nothing else.

pub mod bits;
pub mod circuits;
pub mod distinct_match;
pub mod ids;
pub mod rulespace;
pub mod smpc;

pub use bits::Bits;
pub use ids::{Asn, Prefix, SdxId};
pub use rulespace::{FlowSpec, Packet, RuleError, TernaryRule};
