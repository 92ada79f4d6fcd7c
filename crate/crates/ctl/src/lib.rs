//! Distributed path verification between software-defined exchanges.
//!
//! Each exchange runs a verifier node. When a member asks to install a
//! deflection, its exchange follows the deflected traffic's BGP path, asks
//! every exchange on it (through Distinct-Match) where overlapping traffic
//! would be deflected next, and repeats for those hops up to a budget. A
//! chain that returns to a point already on it, or outgrows the budget, is
//! rejected.

pub mod log;
pub mod msg;
pub mod plane;
pub mod verify;

pub use log::LogLine;
pub use msg::{Change, ControlMsg};
pub use plane::{ActiveRule, ControlPlane, CtlError, Detector, Evaluation, Event, Outcome, RemoveAck, SdxNode};
pub use verify::{explore, trace, verify, Decision, Exploration, HopSource, Point, Reason, Trace, Verdict, VerifyError, VerifyRequest};
