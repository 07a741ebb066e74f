//! Primitives shared by the simulator and the real-UDP runner: virtual time,
//! message envelopes and the event-driven node contract.

use std::fmt;
use std::net::{Ipv4Addr, SocketAddrV4};
use std::ops::{Add, Sub};
use std::time::Duration;

/// An `(address, port)` pair.
pub type Endpoint = SocketAddrV4;

/// Virtual time in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_micros(us: u64) -> Self {
        Self(us)
    }

    pub fn from_millis(ms: u64) -> Self {
        Self(ms * 1_000)
    }

    pub fn from_secs(s: u64) -> Self {
        Self(s * 1_000_000)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        self.saturating_sub(rhs)
    }
}

impl From<Duration> for SimTime {
    fn from(d: Duration) -> Self {
        SimTime(d.as_micros() as u64)
    }
}

impl From<SimTime> for Duration {
    fn from(t: SimTime) -> Self {
        Duration::from_micros(t.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}ms", self.as_millis_f64())
    }
}

/// A datagram in flight. `kind` is a short label used for tracing and
/// per-kind accounting; it is not part of the wire bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub kind: &'static str,
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn size(&self) -> usize {
        self.payload.len()
    }
}

/// Side effects requested by a node while handling one event.
#[derive(Debug)]
pub struct Context<T> {
    now: SimTime,
    ip: Ipv4Addr,
    outbox: Vec<Envelope>,
    timers: Vec<(SimTime, T)>,
}

impl<T> Context<T> {
    pub fn new(now: SimTime, ip: Ipv4Addr) -> Self {
        Self {
            now,
            ip,
            outbox: Vec::new(),
            timers: Vec::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn ip(&self) -> Ipv4Addr {
        self.ip
    }

    pub fn send(&mut self, src_port: u16, dst: Endpoint, kind: &'static str, payload: Vec<u8>) {
        self.outbox.push(Envelope {
            src: SocketAddrV4::new(self.ip, src_port),
            dst,
            kind,
            payload,
        });
    }

    /// Fire `timer` after `delay`.
    pub fn set_timer(&mut self, delay: SimTime, timer: T) {
        self.timers.push((delay, timer));
    }

    pub fn outbox(&self) -> &[Envelope] {
        &self.outbox
    }

    /// Moves the collected effects into `parent`, wrapping each timer.
    pub fn merge_into<U>(self, parent: &mut Context<U>, wrap: impl Fn(T) -> U) {
        parent.outbox.extend(self.outbox);
        parent.timers.extend(self.timers.into_iter().map(|(d, t)| (d, wrap(t))));
    }

    pub fn into_parts(self) -> (Vec<Envelope>, Vec<(SimTime, T)>) {
        (self.outbox, self.timers)
    }
}

/// A single-threaded, event-driven state machine.
pub trait Node {
    type Timer: Clone + fmt::Debug;

    fn on_message(&mut self, ctx: &mut Context<Self::Timer>, env: Envelope);
    fn on_timer(&mut self, ctx: &mut Context<Self::Timer>, timer: Self::Timer);
}

/// Little-endian cursor used by the wire codecs.
#[derive(Debug)]
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn bytes(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.remaining() < n {
            return None;
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Some(out)
    }

    pub fn u8(&mut self) -> Option<u8> {
        self.bytes(1).map(|b| b[0])
    }

    pub fn u16(&mut self) -> Option<u16> {
        self.bytes(2).map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self) -> Option<u32> {
        self.bytes(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Option<u64> {
        self.bytes(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn u128(&mut self) -> Option<u128> {
        self.bytes(16).map(|b| u128::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn string(&mut self) -> Option<String> {
        let n = self.u16()? as usize;
        let raw = self.bytes(n)?;
        String::from_utf8(raw.to_vec()).ok()
    }

    pub fn endpoint(&mut self) -> Option<Endpoint> {
        let ip = Ipv4Addr::from(self.u32()?);
        Some(SocketAddrV4::new(ip, self.u16()?))
    }
}

pub(crate) fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub(crate) fn put_endpoint(out: &mut Vec<u8>, ep: &Endpoint) {
    out.extend_from_slice(&u32::from(*ep.ip()).to_le_bytes());
    out.extend_from_slice(&ep.port().to_le_bytes());
}
