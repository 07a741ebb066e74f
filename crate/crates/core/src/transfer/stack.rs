use std::collections::{BTreeMap, BTreeSet};
use std::net::{Ipv4Addr, SocketAddrV4};

use hmac::{Hmac, Mac};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::Sha256;

use crate::net::{Context, Endpoint, Envelope, Node, SimTime};

use super::packet::{Packet, FIN_RESET, MAC_LEN, STATUS_AUTH_REFUSED, STATUS_OK};
use super::{Receiver, ReceiverStats, Result, Sender, SenderStats, TransferConfig, TransferError};

/// First local port used by sessions this stack initiates.
pub const FIRST_EPHEMERAL_PORT: u16 = 20_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransferTimer {
    Handshake { session_id: u32 },
    Pace { session_id: u32 },
    AckTick { session_id: u32 },
    Rto { session_id: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransferEvent {
    /// Our handshake was accepted.
    Connected { session_id: u32, peer: Endpoint },
    ConnectFailed { session_id: u32, peer: Endpoint, error: TransferError },
    /// A peer's handshake on one of our listening ports was accepted.
    Accepted { session_id: u32, peer: Endpoint, local_port: u16 },
    /// A handshake with a bad credential was refused.
    Refused { peer: Endpoint, local_port: u16 },
    SendComplete { session_id: u32 },
    ReceiveComplete { session_id: u32 },
    Aborted { session_id: u32, error: TransferError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionPhase {
    Connecting,
    Established,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionInfo {
    pub session_id: u32,
    pub phase: SessionPhase,
    pub local_port: u16,
    pub peer: Endpoint,
    pub started_at: Option<SimTime>,
    pub finished_at: Option<SimTime>,
    pub sender: Option<SenderStats>,
    pub receiver: Option<ReceiverStats>,
}

#[derive(Debug)]
struct Session {
    phase: SessionPhase,
    local_port: u16,
    peer: Endpoint,
    nonce: u32,
    attempts: u32,
    last_heard: SimTime,
    sender: Option<Sender>,
    receiver: Option<Receiver>,
    pacing: bool,
    started_at: Option<SimTime>,
    finished_at: Option<SimTime>,
}

impl Session {
    fn active(&self) -> bool {
        self.sender.as_ref().is_some_and(|s| !s.is_finished())
            || self.receiver.as_ref().is_some_and(|r| !r.is_complete())
    }

    fn bytes_acked(&self) -> u64 {
        match (&self.sender, &self.receiver) {
            (Some(s), _) => s.bytes_acked(),
            (None, Some(r)) => r.output().len() as u64,
            _ => 0,
        }
    }
}

fn mac(key: &[u8], label: &[u8], session_id: u32, nonce: u32) -> [u8; MAC_LEN] {
    let mut m = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("HMAC accepts any key length");
    m.update(label);
    m.update(&session_id.to_le_bytes());
    m.update(&nonce.to_le_bytes());
    let full = m.finalize().into_bytes();
    full[..MAC_LEN].try_into().unwrap()
}

const INITIATOR: &[u8] = b"mmgp-init";
const RESPONDER: &[u8] = b"mmgp-resp";

/// All transfer sessions of one host.
#[derive(Debug)]
pub struct TransferStack {
    ip: Ipv4Addr,
    config: TransferConfig,
    key: Vec<u8>,
    rng: ChaCha8Rng,
    listening: BTreeSet<u16>,
    sessions: BTreeMap<u32, Session>,
    next_port: u16,
    events: Vec<TransferEvent>,
}

impl TransferStack {
    pub fn new(ip: Ipv4Addr, key: &[u8], config: TransferConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed ^ u64::from(u32::from(ip)));
        Self {
            ip,
            config,
            key: key.to_vec(),
            rng,
            listening: BTreeSet::new(),
            sessions: BTreeMap::new(),
            next_port: FIRST_EPHEMERAL_PORT,
            events: Vec::new(),
        }
    }

    pub fn config(&self) -> &TransferConfig {
        &self.config
    }

    pub fn endpoint(&self, port: u16) -> Endpoint {
        SocketAddrV4::new(self.ip, port)
    }

    pub fn listen(&mut self, port: u16) {
        self.listening.insert(port);
    }

    pub fn unlisten(&mut self, port: u16) {
        self.listening.remove(&port);
    }

    pub fn is_listening(&self, port: u16) -> bool {
        self.listening.contains(&port)
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn session_ids(&self) -> Vec<u32> {
        self.sessions.keys().copied().collect()
    }

    pub fn session(&self, id: u32) -> Option<SessionInfo> {
        self.sessions.get(&id).map(|s| SessionInfo {
            session_id: id,
            phase: s.phase,
            local_port: s.local_port,
            peer: s.peer,
            started_at: s.started_at,
            finished_at: s.finished_at,
            sender: s.sender.as_ref().map(|x| x.stats().clone()),
            receiver: s.receiver.as_ref().map(|x| x.stats().clone()),
        })
    }

    pub fn received(&self, id: u32) -> Option<&[u8]> {
        self.sessions.get(&id)?.receiver.as_ref().map(Receiver::output)
    }

    pub fn take_received(&mut self, id: u32) -> Option<Vec<u8>> {
        Some(self.sessions.get_mut(&id)?.receiver.as_mut()?.take_output())
    }

    pub fn events(&self) -> &[TransferEvent] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<TransferEvent> {
        std::mem::take(&mut self.events)
    }

    /// Drops all state for a session. Returns whether it existed.
    pub fn close(&mut self, id: u32) -> bool {
        self.sessions.remove(&id).is_some()
    }

    fn send(&self, ctx: &mut Context<TransferTimer>, local_port: u16, to: Endpoint, pkt: &Packet) {
        ctx.send(local_port, to, pkt.kind(), pkt.encode());
    }

    /// Starts a handshake towards `peer`; the outcome arrives as a
    /// `Connected` or `ConnectFailed` event.
    pub fn connect(&mut self, ctx: &mut Context<TransferTimer>, peer: Endpoint) -> u32 {
        let session_id = loop {
            let id: u32 = self.rng.gen();
            if id != 0 && id != FIN_RESET && !self.sessions.contains_key(&id) {
                break id;
            }
        };
        let nonce: u32 = self.rng.gen();
        let local_port = self.next_port;
        self.next_port = self.next_port.checked_add(1).unwrap_or(FIRST_EPHEMERAL_PORT);
        self.sessions.insert(
            session_id,
            Session {
                phase: SessionPhase::Connecting,
                local_port,
                peer,
                nonce,
                attempts: 1,
                last_heard: ctx.now(),
                sender: None,
                receiver: None,
                pacing: false,
                started_at: None,
                finished_at: None,
            },
        );
        let pkt = Packet::Handshake {
            session_id,
            nonce,
            mac: mac(&self.key, INITIATOR, session_id, nonce),
        };
        self.send(ctx, local_port, peer, &pkt);
        ctx.set_timer(self.config.handshake_timeout, TransferTimer::Handshake { session_id });
        session_id
    }

    /// Streams `data` to the session's peer.
    pub fn send_stream(&mut self, ctx: &mut Context<TransferTimer>, id: u32, data: Vec<u8>) -> Result<()> {
        let sender = Sender::new(id, data, &self.config)?;
        let s = self.sessions.get_mut(&id).ok_or(TransferError::UnknownSession(id))?;
        if s.phase != SessionPhase::Established {
            return Err(TransferError::ProtocolViolation(format!("session {id} is not established")));
        }
        if s.sender.is_some() {
            return Err(TransferError::ProtocolViolation(format!("session {id} is already sending")));
        }
        s.sender = Some(sender);
        s.started_at = Some(ctx.now());
        s.last_heard = ctx.now();
        self.kick(ctx, id);
        Ok(())
    }

    fn kick(&mut self, ctx: &mut Context<TransferTimer>, id: u32) {
        if let Some(s) = self.sessions.get_mut(&id) {
            if !s.pacing && s.sender.as_ref().is_some_and(Sender::has_work) {
                s.pacing = true;
                ctx.set_timer(SimTime::ZERO, TransferTimer::Pace { session_id: id });
            }
        }
    }

    fn abort(&mut self, ctx: &mut Context<TransferTimer>, id: u32, reason: TransferError) {
        if let Some(s) = self.sessions.remove(&id) {
            let reset = Packet::Fin {
                session_id: id,
                total: FIN_RESET,
            };
            self.send(ctx, s.local_port, s.peer, &reset);
            let error = match reason {
                TransferError::Aborted { .. } => reason,
                other => TransferError::Aborted {
                    bytes_acked: s.bytes_acked(),
                    reason: other.to_string(),
                },
            };
            self.events.push(TransferEvent::Aborted { session_id: id, error });
        }
    }

    fn start_rto(&self, ctx: &mut Context<TransferTimer>, id: u32) {
        ctx.set_timer(self.config.rto(), TransferTimer::Rto { session_id: id });
    }

    pub fn handle(&mut self, ctx: &mut Context<TransferTimer>, env: Envelope) {
        let Ok(pkt) = Packet::decode(&env.payload) else {
            return;
        };
        let id = pkt.session_id();
        let now = ctx.now();
        let local_port = env.dst.port();

        if let Packet::Handshake { nonce, mac: their_mac, .. } = pkt {
            self.on_handshake(ctx, env.src, local_port, id, nonce, their_mac);
            return;
        }
        let Some(s) = self.sessions.get_mut(&id) else {
            return;
        };
        if s.peer != env.src || s.local_port != local_port {
            return;
        }
        s.last_heard = now;

        match pkt {
            Packet::HandshakeAck { nonce, status, mac: their_mac, .. } => {
                if s.phase != SessionPhase::Connecting || nonce != s.nonce {
                    return;
                }
                let peer = s.peer;
                if status == STATUS_AUTH_REFUSED {
                    self.sessions.remove(&id);
                    self.events.push(TransferEvent::ConnectFailed {
                        session_id: id,
                        peer,
                        error: TransferError::AuthFailed(peer),
                    });
                } else if status == STATUS_OK && their_mac == mac(&self.key, RESPONDER, id, nonce) {
                    s.phase = SessionPhase::Established;
                    self.events.push(TransferEvent::Connected { session_id: id, peer });
                    self.start_rto(ctx, id);
                } else {
                    let local = s.local_port;
                    self.sessions.remove(&id);
                    let reset = Packet::Fin {
                        session_id: id,
                        total: FIN_RESET,
                    };
                    self.send(ctx, local, peer, &reset);
                    self.events.push(TransferEvent::ConnectFailed {
                        session_id: id,
                        peer,
                        error: TransferError::AuthFailed(peer),
                    });
                }
            }
            _ if s.phase != SessionPhase::Established => {}
            Packet::Data { seq, payload, .. } => {
                if s.sender.is_some() {
                    return;
                }
                let fresh = s.receiver.is_none();
                let receiver = s.receiver.get_or_insert_with(|| Receiver::new(id));
                let was_complete = receiver.is_complete();
                let nak = receiver.on_data(seq, payload);
                let completion = receiver.completion();
                let (local, peer) = (s.local_port, s.peer);
                if was_complete {
                    // our FIN echo was lost; the sender is still retransmitting
                    if let Some(echo) = completion {
                        self.send(ctx, local, peer, &echo);
                    }
                    return;
                }
                if let Some(nak) = nak {
                    self.send(ctx, local, peer, &nak);
                }
                if fresh {
                    ctx.set_timer(self.config.ack_interval, TransferTimer::AckTick { session_id: id });
                }
                if let Some(fin) = completion {
                    self.finish_receive(ctx, id, now, &fin);
                }
            }
            Packet::Ack { ack_seq, .. } => {
                let Some(sender) = s.sender.as_mut() else { return };
                if let Err(e) = sender.on_ack(ack_seq) {
                    self.abort(ctx, id, e);
                    return;
                }
                self.kick(ctx, id);
            }
            Packet::Nak { ranges, .. } => {
                let Some(sender) = s.sender.as_mut() else { return };
                sender.on_nak(&ranges, now);
                self.kick(ctx, id);
            }
            Packet::Fin { total, .. } => {
                if total == FIN_RESET {
                    let bytes_acked = s.bytes_acked();
                    self.sessions.remove(&id);
                    self.events.push(TransferEvent::Aborted {
                        session_id: id,
                        error: TransferError::Aborted {
                            bytes_acked,
                            reason: "reset by peer".into(),
                        },
                    });
                    return;
                }
                if let Some(sender) = s.sender.as_mut() {
                    let was = sender.is_finished();
                    if sender.on_fin_echo(total) && !was {
                        s.finished_at = Some(now);
                        s.pacing = false;
                        self.events.push(TransferEvent::SendComplete { session_id: id });
                    }
                    return;
                }
                let fresh = s.receiver.is_none();
                let receiver = s.receiver.get_or_insert_with(|| Receiver::new(id));
                let was_complete = receiver.is_complete();
                let reply = receiver.on_fin(total);
                let complete = receiver.is_complete();
                let (local, peer) = (s.local_port, s.peer);
                if fresh && !complete {
                    ctx.set_timer(self.config.ack_interval, TransferTimer::AckTick { session_id: id });
                }
                match reply {
                    Some(fin @ Packet::Fin { .. }) if !was_complete => self.finish_receive(ctx, id, now, &fin),
                    Some(p) => self.send(ctx, local, peer, &p),
                    None => {}
                }
            }
            Packet::Handshake { .. } => unreachable!("handled above"),
        }
    }

    fn finish_receive(&mut self, ctx: &mut Context<TransferTimer>, id: u32, now: SimTime, fin: &Packet) {
        if let Some(s) = self.sessions.get_mut(&id) {
            s.finished_at = Some(now);
            let (local, peer) = (s.local_port, s.peer);
            self.send(ctx, local, peer, fin);
            self.events.push(TransferEvent::ReceiveComplete { session_id: id });
        }
    }

    fn on_handshake(
        &mut self,
        ctx: &mut Context<TransferTimer>,
        peer: Endpoint,
        local_port: u16,
        id: u32,
        nonce: u32,
        their_mac: [u8; MAC_LEN],
    ) {
        if !self.listening.contains(&local_port) {
            return;
        }
        let ok = Packet::HandshakeAck {
            session_id: id,
            nonce,
            status: STATUS_OK,
            mac: mac(&self.key, RESPONDER, id, nonce),
        };
        if let Some(s) = self.sessions.get(&id) {
            if s.peer == peer && s.nonce == nonce && s.phase == SessionPhase::Established {
                self.send(ctx, local_port, peer, &ok);
            }
            return;
        }
        if their_mac != mac(&self.key, INITIATOR, id, nonce) {
            let refused = Packet::HandshakeAck {
                session_id: id,
                nonce,
                status: STATUS_AUTH_REFUSED,
                mac: [0; MAC_LEN],
            };
            self.send(ctx, local_port, peer, &refused);
            self.events.push(TransferEvent::Refused { peer, local_port });
            return;
        }
        self.sessions.insert(
            id,
            Session {
                phase: SessionPhase::Established,
                local_port,
                peer,
                nonce,
                attempts: 1,
                last_heard: ctx.now(),
                sender: None,
                receiver: None,
                pacing: false,
                started_at: None,
                finished_at: None,
            },
        );
        self.send(ctx, local_port, peer, &ok);
        self.events.push(TransferEvent::Accepted {
            session_id: id,
            peer,
            local_port,
        });
        self.start_rto(ctx, id);
    }

    pub fn on_timer(&mut self, ctx: &mut Context<TransferTimer>, timer: TransferTimer) {
        let now = ctx.now();
        match timer {
            TransferTimer::Handshake { session_id: id } => {
                let Some(s) = self.sessions.get_mut(&id) else { return };
                if s.phase != SessionPhase::Connecting {
                    return;
                }
                if s.attempts > self.config.handshake_retries {
                    let (peer, attempts) = (s.peer, s.attempts);
                    self.sessions.remove(&id);
                    self.events.push(TransferEvent::ConnectFailed {
                        session_id: id,
                        peer,
                        error: TransferError::ConnectFailed { endpoint: peer, attempts },
                    });
                    return;
                }
                s.attempts += 1;
                let pkt = Packet::Handshake {
                    session_id: id,
                    nonce: s.nonce,
                    mac: mac(&self.key, INITIATOR, id, s.nonce),
                };
                let (local, peer) = (s.local_port, s.peer);
                self.send(ctx, local, peer, &pkt);
                ctx.set_timer(self.config.handshake_timeout, TransferTimer::Handshake { session_id: id });
            }
            TransferTimer::Pace { session_id: id } => {
                let Some(s) = self.sessions.get_mut(&id) else { return };
                let Some(sender) = s.sender.as_mut() else {
                    s.pacing = false;
                    return;
                };
                match sender.next_packet(now) {
                    Some(pkt) => {
                        let gap = sender.pace_gap();
                        let (local, peer) = (s.local_port, s.peer);
                        self.send(ctx, local, peer, &pkt);
                        ctx.set_timer(gap, TransferTimer::Pace { session_id: id });
                    }
                    None => s.pacing = false,
                }
            }
            TransferTimer::AckTick { session_id: id } => {
                let Some(s) = self.sessions.get_mut(&id) else { return };
                let Some(receiver) = s.receiver.as_mut() else { return };
                if receiver.is_complete() {
                    return;
                }
                let ack = receiver.ack();
                let (local, peer) = (s.local_port, s.peer);
                self.send(ctx, local, peer, &ack);
                ctx.set_timer(self.config.ack_interval, TransferTimer::AckTick { session_id: id });
            }
            TransferTimer::Rto { session_id: id } => {
                let Some(s) = self.sessions.get_mut(&id) else { return };
                if !s.active() {
                    if s.finished_at.is_none() {
                        self.start_rto(ctx, id);
                    }
                    return;
                }
                if now.saturating_sub(s.last_heard) > self.config.dead_timeout {
                    let bytes_acked = s.bytes_acked();
                    let reason = TransferError::Aborted {
                        bytes_acked,
                        reason: "peer unresponsive".into(),
                    };
                    self.abort(ctx, id, reason);
                    return;
                }
                let rto = self.config.rto();
                let (local, peer) = (s.local_port, s.peer);
                if let Some(fin) = s.sender.as_mut().and_then(|x| x.on_rto(now, rto)) {
                    self.send(ctx, local, peer, &fin);
                }
                self.kick(ctx, id);
                self.start_rto(ctx, id);
            }
        }
    }
}

impl Node for TransferStack {
    type Timer = TransferTimer;

    fn on_message(&mut self, ctx: &mut Context<TransferTimer>, env: Envelope) {
        self.handle(ctx, env);
    }

    fn on_timer(&mut self, ctx: &mut Context<TransferTimer>, timer: TransferTimer) {
        TransferStack::on_timer(self, ctx, timer);
    }
}
