//! A session is one party's end of a two-party computation: a channel plus
//! phase/round bookkeeping and a transcript of every frame.

use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use super::channel::Channel;
use super::frame::{Frame, FrameKind};
use super::SmpcError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Input-independent preparation (dealer material, nonces, garbled tables).
    Setup,
    /// Everything that depends on the parties' inputs.
    Online,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Sent,
    Received,
    /// Setup material delivered by the trusted dealer, outside the peer link.
    FromDealer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub kind: FrameKind,
    /// Wire size including framing.
    pub bytes: usize,
    pub round: u32,
    pub phase: Phase,
}

#[derive(Clone, Debug)]
pub struct SessionTranscript {
    entries: Vec<TranscriptEntry>,
    rounds: [u32; 2],
    hasher: Sha256,
    captured: Option<Vec<Frame>>,
    wall: [Duration; 2],
}

fn phase_idx(p: Phase) -> usize {
    match p {
        Phase::Setup => 0,
        Phase::Online => 1,
    }
}

impl SessionTranscript {
    fn new(capture: bool) -> Self {
        SessionTranscript {
            entries: Vec::new(),
            rounds: [0, 0],
            hasher: Sha256::new(),
            captured: capture.then(Vec::new),
            wall: [Duration::ZERO; 2],
        }
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    /// Number of communication rounds opened in `phase`.
    pub fn rounds(&self, phase: Phase) -> u32 {
        self.rounds[phase_idx(phase)]
    }

    /// Bytes sent plus received over the peer link in `phase`.
    pub fn link_bytes(&self, phase: Phase) -> usize {
        self.entries.iter().filter(|e| e.phase == phase && e.direction != Direction::FromDealer).map(|e| e.bytes).sum()
    }

    pub fn bytes(&self, phase: Phase, direction: Direction) -> usize {
        self.entries.iter().filter(|e| e.phase == phase && e.direction == direction).map(|e| e.bytes).sum()
    }

    pub fn wall(&self, phase: Phase) -> Duration {
        self.wall[phase_idx(phase)]
    }

    /// SHA-256 over every entry and payload, in order.
    pub fn digest(&self) -> [u8; 32] {
        self.hasher.clone().finalize().into()
    }

    /// Frames received from the peer, if capture was enabled.
    pub fn captured(&self) -> Option<&[Frame]> {
        self.captured.as_deref()
    }

    fn record(&mut self, direction: Direction, phase: Phase, frame: &Frame) {
        let round = self.rounds[phase_idx(phase)];
        let entry = TranscriptEntry { direction, kind: frame.kind, bytes: frame.wire_len(), round, phase };
        self.hasher.update([direction as u8, frame.kind as u8, phase_idx(phase) as u8]);
        self.hasher.update(round.to_be_bytes());
        self.hasher.update((frame.payload.len() as u64).to_be_bytes());
        self.hasher.update(&frame.payload);
        self.entries.push(entry);
    }
}

pub struct Session<C: Channel> {
    channel: C,
    phase: Phase,
    phase_start: Instant,
    transcript: SessionTranscript,
}

impl<C: Channel> Session<C> {
    pub fn new(channel: C) -> Self {
        Self::with_capture(channel, false)
    }

    /// Like [`Session::new`], additionally keeping every received frame.
    pub fn with_capture(channel: C, capture: bool) -> Self {
        Session { channel, phase: Phase::Setup, phase_start: Instant::now(), transcript: SessionTranscript::new(capture) }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Closes the setup phase and starts the online clock.
    pub fn begin_online(&mut self) {
        if self.phase == Phase::Setup {
            self.transcript.wall[0] += self.phase_start.elapsed();
            self.phase = Phase::Online;
            self.phase_start = Instant::now();
        }
    }

    /// Stops the clock of the current phase.
    pub fn finish(&mut self) {
        let i = phase_idx(self.phase);
        self.transcript.wall[i] += self.phase_start.elapsed();
        self.phase_start = Instant::now();
    }

    /// Opens a new communication round in the current phase. Messages that
    /// can travel concurrently belong to the same round.
    pub fn next_round(&mut self) {
        self.transcript.rounds[phase_idx(self.phase)] += 1;
    }

    pub fn send(&mut self, kind: FrameKind, payload: Vec<u8>) -> Result<(), SmpcError> {
        let frame = Frame::new(kind, payload);
        self.transcript.record(Direction::Sent, self.phase, &frame);
        self.channel.send(frame)
    }

    /// Receives the next frame, which must be of the expected kind.
    pub fn recv(&mut self, kind: FrameKind) -> Result<Vec<u8>, SmpcError> {
        let frame = self.channel.recv()?;
        self.transcript.record(Direction::Received, self.phase, &frame);
        if frame.kind != kind {
            return Err(SmpcError::Protocol(format!("expected {}, got {}", kind.name(), frame.kind.name())));
        }
        if let Some(c) = self.transcript.captured.as_mut() {
            c.push(frame.clone());
        }
        Ok(frame.payload)
    }

    /// Accounts for material handed over by the dealer.
    pub fn record_dealer(&mut self, kind: FrameKind, payload: &[u8]) {
        let frame = Frame::new(kind, payload.to_vec());
        self.transcript.record(Direction::FromDealer, self.phase, &frame);
    }

    pub fn transcript(&self) -> &SessionTranscript {
        &self.transcript
    }

    pub fn into_parts(self) -> (C, SessionTranscript) {
        (self.channel, self.transcript)
    }

    pub fn channel_mut(&mut self) -> &mut C {
        &mut self.channel
    }
}
