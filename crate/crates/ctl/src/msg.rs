//! Control messages between exchanges, carried in the same frames as the
//! secure-computation traffic.

use prelude_core::smpc::frame::PayloadReader;
use prelude_core::smpc::{Frame, FrameKind};
use prelude_core::{Asn, Prefix, SdxId};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MsgError {
    #[error("unexpected frame kind {0}")]
    UnexpectedKind(&'static str),
    #[error("malformed {0} payload")]
    Malformed(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Change {
    Registered,
    Removed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlMsg {
    /// `subscriber` wants to hear about changes to `member`'s rules for `prefix`.
    Subscribe { subscriber: SdxId, prefix: Prefix, member: Asn },
    /// `member`'s rule set for `prefix` at `sdx` changed.
    NotifyChange { sdx: SdxId, prefix: Prefix, member: Asn, change: Change },
}

impl ControlMsg {
    pub fn to_frame(&self) -> Frame {
        let mut p = Vec::with_capacity(11);
        match *self {
            ControlMsg::Subscribe { subscriber, prefix, member } => {
                p.extend_from_slice(&subscriber.0.to_be_bytes());
                p.extend_from_slice(&prefix.0.to_be_bytes());
                p.extend_from_slice(&member.0.to_be_bytes());
                Frame { kind: FrameKind::Subscribe, payload: p }
            }
            ControlMsg::NotifyChange { sdx, prefix, member, change } => {
                p.extend_from_slice(&sdx.0.to_be_bytes());
                p.extend_from_slice(&prefix.0.to_be_bytes());
                p.extend_from_slice(&member.0.to_be_bytes());
                p.push(match change {
                    Change::Registered => 0,
                    Change::Removed => 1,
                });
                Frame { kind: FrameKind::NotifyChange, payload: p }
            }
        }
    }

    pub fn from_frame(frame: &Frame) -> Result<ControlMsg, MsgError> {
        let name = frame.kind.name();
        let mut r = PayloadReader::new(&frame.payload);
        let bad = |_| MsgError::Malformed(name);
        let msg = match frame.kind {
            FrameKind::Subscribe => ControlMsg::Subscribe {
                subscriber: SdxId(r.u16().map_err(bad)?),
                prefix: Prefix(r.u32().map_err(bad)?),
                member: Asn(r.u32().map_err(bad)?),
            },
            FrameKind::NotifyChange => ControlMsg::NotifyChange {
                sdx: SdxId(r.u16().map_err(bad)?),
                prefix: Prefix(r.u32().map_err(bad)?),
                member: Asn(r.u32().map_err(bad)?),
                change: match r.u8().map_err(bad)? {
                    0 => Change::Registered,
                    1 => Change::Removed,
                    _ => return Err(MsgError::Malformed(name)),
                },
            },
            _ => return Err(MsgError::UnexpectedKind(name)),
        };
        r.finish().map_err(bad)?;
        Ok(msg)
    }

    /// Encodes to wire bytes and decodes again, as a delivery would.
    pub fn transmit(&self) -> ControlMsg {
        let bytes = self.to_frame().encode();
        let (frame, _) = Frame::decode(&bytes).expect("own encoding");
        ControlMsg::from_frame(&frame).expect("own encoding")
    }
}
