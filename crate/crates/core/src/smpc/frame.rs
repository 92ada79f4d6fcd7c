//! Length-prefixed binary frames: `u32` big-endian length of the remainder,
//! one kind byte, then the payload.

use std::io::{self, Read, Write};

use thiserror::Error;

/// Upper bound on a single frame, to reject corrupt length prefixes.
pub const MAX_FRAME_LEN: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum FrameKind {
    InputShare = 1,
    AndOpening = 2,
    GarbledTables = 3,
    Labels = 4,
    OutputShare = 5,
    SetupTriples = 6,
    VerifyQuery = 16,
    VerifyResult = 17,
    Subscribe = 18,
    NotifyChange = 19,
}

impl FrameKind {
    pub const ALL: [FrameKind; 10] = [
        FrameKind::InputShare,
        FrameKind::AndOpening,
        FrameKind::GarbledTables,
        FrameKind::Labels,
        FrameKind::OutputShare,
        FrameKind::SetupTriples,
        FrameKind::VerifyQuery,
        FrameKind::VerifyResult,
        FrameKind::Subscribe,
        FrameKind::NotifyChange,
    ];

    pub fn from_u8(v: u8) -> Option<FrameKind> {
        FrameKind::ALL.into_iter().find(|k| *k as u8 == v)
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameKind::InputShare => "INPUT_SHARE",
            FrameKind::AndOpening => "AND_OPENING",
            FrameKind::GarbledTables => "GARBLED_TABLES",
            FrameKind::Labels => "LABELS",
            FrameKind::OutputShare => "OUTPUT_SHARE",
            FrameKind::SetupTriples => "SETUP_TRIPLES",
            FrameKind::VerifyQuery => "VERIFY_QUERY",
            FrameKind::VerifyResult => "VERIFY_RESULT",
            FrameKind::Subscribe => "SUBSCRIBE",
            FrameKind::NotifyChange => "NOTIFY_CHANGE",
        }
    }
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("unknown frame kind {0:#04x}")]
    UnknownKind(u8),
    #[error("frame length {0} out of range")]
    BadLength(usize),
    #[error("frame truncated")]
    Truncated,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: FrameKind, payload: Vec<u8>) -> Self {
        Frame { kind, payload }
    }

    /// Bytes on the wire, including the length prefix and kind byte.
    pub fn wire_len(&self) -> usize {
        5 + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&((self.payload.len() + 1) as u32).to_be_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes one frame from the front of `buf`, returning it and the
    /// number of bytes consumed.
    pub fn decode(buf: &[u8]) -> Result<(Frame, usize), FrameError> {
        if buf.len() < 4 {
            return Err(FrameError::Truncated);
        }
        let len = u32::from_be_bytes(buf[..4].try_into().unwrap()) as usize;
        if len == 0 || len > MAX_FRAME_LEN {
            return Err(FrameError::BadLength(len));
        }
        if buf.len() < 4 + len {
            return Err(FrameError::Truncated);
        }
        let kind = FrameKind::from_u8(buf[4]).ok_or(FrameError::UnknownKind(buf[4]))?;
        Ok((Frame { kind, payload: buf[5..4 + len].to_vec() }, 4 + len))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), FrameError> {
        w.write_all(&self.encode())?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Frame, FrameError> {
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let len = u32::from_be_bytes(len) as usize;
        if len == 0 || len > MAX_FRAME_LEN {
            return Err(FrameError::BadLength(len));
        }
        let mut body = vec![0u8; len];
        r.read_exact(&mut body)?;
        let kind = FrameKind::from_u8(body[0]).ok_or(FrameError::UnknownKind(body[0]))?;
        body.remove(0);
        Ok(Frame { kind, payload: body })
    }
}

/// Cursor over a payload with big-endian integer readers.
pub struct PayloadReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        PayloadReader { buf, pos: 0 }
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], FrameError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(FrameError::Truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, FrameError> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, FrameError> {
        Ok(u16::from_be_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, FrameError> {
        Ok(u32::from_be_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, FrameError> {
        Ok(u64::from_be_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn u128(&mut self) -> Result<u128, FrameError> {
        Ok(u128::from_be_bytes(self.bytes(16)?.try_into().unwrap()))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn finish(self) -> Result<(), FrameError> {
        if self.remaining() == 0 {
            Ok(())
        } else {
            Err(FrameError::BadLength(self.buf.len()))
        }
    }
}
