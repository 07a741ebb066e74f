//! Drives a [`Node`] over real UDP sockets with a wall-clock timer wheel.
//!
//! Every local port a node sends from is bound on demand; the node's
//! listening ports are bound up front with [`UdpRunner::bind`]. Timer and
//! datagram handling is serialized on the calling thread.

use std::collections::BTreeMap;
use std::io::{self, ErrorKind};
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4, UdpSocket};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::net::{Context, Envelope, Node, SimTime};

#[derive(Debug, Error)]
pub enum UdpError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddrV4, source: io::Error },
    #[error("socket error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, UdpError>;

const MAX_DATAGRAM: usize = 65_535;
const IDLE_SLEEP: Duration = Duration::from_millis(1);

pub struct UdpRunner<N: Node> {
    ip: Ipv4Addr,
    node: N,
    sockets: BTreeMap<u16, UdpSocket>,
    timers: BTreeMap<(SimTime, u64), N::Timer>,
    seq: u64,
    start: Instant,
    buf: Vec<u8>,
}

impl<N: Node> UdpRunner<N> {
    pub fn new(ip: Ipv4Addr, node: N) -> Self {
        Self {
            ip,
            node,
            sockets: BTreeMap::new(),
            timers: BTreeMap::new(),
            seq: 0,
            start: Instant::now(),
            buf: vec![0; MAX_DATAGRAM],
        }
    }

    pub fn ip(&self) -> Ipv4Addr {
        self.ip
    }

    pub fn node(&self) -> &N {
        &self.node
    }

    pub fn node_mut(&mut self) -> &mut N {
        &mut self.node
    }

    /// Elapsed time since the runner was created.
    pub fn now(&self) -> SimTime {
        SimTime::from_micros(self.start.elapsed().as_micros() as u64)
    }

    pub fn bind(&mut self, port: u16) -> Result<()> {
        if self.sockets.contains_key(&port) {
            return Ok(());
        }
        let addr = SocketAddrV4::new(self.ip, port);
        let sock = UdpSocket::bind(addr).map_err(|source| UdpError::Bind { addr, source })?;
        sock.set_nonblocking(true)?;
        self.sockets.insert(port, sock);
        Ok(())
    }

    pub fn with_node<R>(&mut self, f: impl FnOnce(&mut N, &mut Context<N::Timer>) -> R) -> Result<R> {
        let mut ctx = Context::new(self.now(), self.ip);
        let out = f(&mut self.node, &mut ctx);
        self.apply(ctx)?;
        Ok(out)
    }

    fn apply(&mut self, ctx: Context<N::Timer>) -> Result<()> {
        let now = ctx.now();
        let (outbox, timers) = ctx.into_parts();
        for env in outbox {
            self.bind(env.src.port())?;
            let sock = &self.sockets[&env.src.port()];
            match sock.send_to(&env.payload, env.dst) {
                Ok(_) => {}
                // unreachable peers behave like a lossy link
                Err(e) if matches!(e.kind(), ErrorKind::ConnectionRefused | ErrorKind::WouldBlock) => {}
                Err(e) => return Err(e.into()),
            }
        }
        for (delay, timer) in timers {
            self.timers.insert((now + delay, self.seq), timer);
            self.seq += 1;
        }
        Ok(())
    }

    /// Handles every due timer and pending datagram once. Returns whether
    /// anything happened.
    pub fn poll(&mut self) -> Result<bool> {
        let mut busy = false;
        let now = self.now();
        while let Some(entry) = self.timers.first_entry() {
            if entry.key().0 > now {
                break;
            }
            let timer = entry.remove();
            self.with_node(|n, ctx| n.on_timer(ctx, timer))?;
            busy = true;
        }
        let ports: Vec<u16> = self.sockets.keys().copied().collect();
        for port in ports {
            loop {
                let received = self.sockets[&port].recv_from(&mut self.buf);
                let (len, from) = match received {
                    Ok(r) => r,
                    Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::ConnectionRefused | ErrorKind::ConnectionReset) => break,
                    Err(e) => return Err(e.into()),
                };
                let SocketAddr::V4(src) = from else { continue };
                let env = Envelope {
                    src,
                    dst: SocketAddrV4::new(self.ip, port),
                    kind: "udp",
                    payload: self.buf[..len].to_vec(),
                };
                self.with_node(|n, ctx| n.on_message(ctx, env))?;
                busy = true;
            }
        }
        Ok(busy)
    }

    /// Runs until `done` holds or `timeout` of wall-clock time passes.
    /// Without a timeout it runs until `done` holds.
    pub fn run_until(&mut self, timeout: Option<Duration>, mut done: impl FnMut(&N) -> bool) -> Result<bool> {
        let deadline = timeout.map(|t| Instant::now() + t);
        loop {
            if done(&self.node) {
                return Ok(true);
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return Ok(false);
            }
            if !self.poll()? {
                std::thread::sleep(IDLE_SLEEP);
            }
        }
    }
}
