//! Message transports between the two parties of a session.

use std::io::{BufReader, BufWriter, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::{Duration, Instant};

use super::frame::Frame;
use super::SmpcError;

/// How long a receive may block before the session is considered dead.
pub const DEFAULT_RECV_TIMEOUT: Duration = Duration::from_secs(120);

pub trait Channel: Send {
    fn send(&mut self, frame: Frame) -> Result<(), SmpcError>;
    fn recv(&mut self) -> Result<Frame, SmpcError>;
}

impl<C: Channel + ?Sized> Channel for Box<C> {
    fn send(&mut self, frame: Frame) -> Result<(), SmpcError> {
        (**self).send(frame)
    }
    fn recv(&mut self) -> Result<Frame, SmpcError> {
        (**self).recv()
    }
}

/// Receives `(deliver_at, frame)` pairs and holds each frame until its
/// delivery time.
struct DelayedInbox {
    rx: Receiver<(Instant, Frame)>,
    timeout: Duration,
}

impl DelayedInbox {
    fn recv(&mut self) -> Result<Frame, SmpcError> {
        let (at, frame) = self.rx.recv_timeout(self.timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => SmpcError::SessionAborted("receive timed out".into()),
            RecvTimeoutError::Disconnected => SmpcError::SessionAborted("peer closed the channel".into()),
        })?;
        let now = Instant::now();
        if at > now {
            thread::sleep(at - now);
        }
        Ok(frame)
    }
}

/// In-process channel with an injected one-way delay.
pub struct LocalChannel {
    tx: Sender<(Instant, Frame)>,
    inbox: DelayedInbox,
    delay: Duration,
}

impl LocalChannel {
    pub fn pair(delay: Duration) -> (LocalChannel, LocalChannel) {
        let (tx_ab, rx_ab) = mpsc::channel();
        let (tx_ba, rx_ba) = mpsc::channel();
        let a = LocalChannel { tx: tx_ab, inbox: DelayedInbox { rx: rx_ba, timeout: DEFAULT_RECV_TIMEOUT }, delay };
        let b = LocalChannel { tx: tx_ba, inbox: DelayedInbox { rx: rx_ab, timeout: DEFAULT_RECV_TIMEOUT }, delay };
        (a, b)
    }

    pub fn set_recv_timeout(&mut self, timeout: Duration) {
        self.inbox.timeout = timeout;
    }
}

impl Channel for LocalChannel {
    fn send(&mut self, frame: Frame) -> Result<(), SmpcError> {
        self.tx
            .send((Instant::now() + self.delay, frame))
            .map_err(|_| SmpcError::SessionAborted("peer closed the channel".into()))
    }

    fn recv(&mut self) -> Result<Frame, SmpcError> {
        self.inbox.recv()
    }
}

/// Frames over a TCP stream. A reader thread timestamps each arriving frame
/// so that an extra one-way delay can be injected on top of the real link.
pub struct TcpChannel {
    writer: BufWriter<TcpStream>,
    inbox: DelayedInbox,
    stream: TcpStream,
}

impl TcpChannel {
    pub fn new(stream: TcpStream, extra_delay: Duration) -> Result<TcpChannel, SmpcError> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        let writer = BufWriter::new(stream.try_clone()?);
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            while let Ok(frame) = Frame::read_from(&mut reader) {
                if tx.send((Instant::now() + extra_delay, frame)).is_err() {
                    break;
                }
            }
        });
        Ok(TcpChannel { writer, inbox: DelayedInbox { rx, timeout: DEFAULT_RECV_TIMEOUT }, stream })
    }
}

impl Channel for TcpChannel {
    fn send(&mut self, frame: Frame) -> Result<(), SmpcError> {
        frame.write_to(&mut self.writer)?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Frame, SmpcError> {
        self.inbox.recv()
    }
}

impl Drop for TcpChannel {
    fn drop(&mut self) {
        let _ = self.writer.flush();
        let _ = self.stream.shutdown(Shutdown::Both);
    }
}
