//! Control-plane framing: `u8 type, u16 body length, body`, little-endian.

use crate::net::{put_endpoint, put_string, Endpoint, Reader, SimTime};

use super::{Advertisement, BindingAnswer, BindingQuery, NodeId, OverlayError, Result};

pub const ADVERTISE: u8 = 1;
pub const QUERY: u8 = 2;
pub const ANSWER: u8 = 3;
pub const PING: u8 = 4;
pub const PONG: u8 = 5;
pub const PEER_EXCHANGE: u8 = 6;
pub const ADVERTISE_ACK: u8 = 7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerRecord {
    pub id: NodeId,
    pub addr: Endpoint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Advertise { request_id: u64, ad: Advertisement },
    AdvertiseAck { request_id: u64 },
    Query(BindingQuery),
    Answer(BindingAnswer),
    Ping { nonce: u64, from: NodeId },
    Pong { nonce: u64, from: NodeId },
    /// Push-pull anti-entropy. `reply` marks the pull half, which is not
    /// answered again.
    PeerExchange { from: NodeId, reply: bool, peers: Vec<PeerRecord> },
}

impl Message {
    pub fn type_code(&self) -> u8 {
        match self {
            Message::Advertise { .. } => ADVERTISE,
            Message::Query(_) => QUERY,
            Message::Answer(_) => ANSWER,
            Message::Ping { .. } => PING,
            Message::Pong { .. } => PONG,
            Message::PeerExchange { .. } => PEER_EXCHANGE,
            Message::AdvertiseAck { .. } => ADVERTISE_ACK,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Advertise { .. } => "ADVERTISE",
            Message::Query(_) => "QUERY",
            Message::Answer(_) => "ANSWER",
            Message::Ping { .. } => "PING",
            Message::Pong { .. } => "PONG",
            Message::PeerExchange { .. } => "PEER_EXCHANGE",
            Message::AdvertiseAck { .. } => "ADVERTISE_ACK",
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut body = Vec::new();
        match self {
            Message::Advertise { request_id, ad } => {
                body.extend_from_slice(&request_id.to_le_bytes());
                put_ad(&mut body, ad);
            }
            Message::AdvertiseAck { request_id } => body.extend_from_slice(&request_id.to_le_bytes()),
            Message::Query(q) => {
                body.extend_from_slice(&q.query_id.to_le_bytes());
                body.extend_from_slice(&q.requester.0.to_le_bytes());
                put_string(&mut body, &q.service_name);
                put_endpoint(&mut body, &q.reply_endpoint);
                body.push(q.hop_count);
                body.push(q.visited.len() as u8);
                for v in &q.visited {
                    body.extend_from_slice(&v.0.to_le_bytes());
                }
            }
            Message::Answer(a) => {
                body.extend_from_slice(&a.query_id.to_le_bytes());
                match &a.advertisement {
                    Some(ad) => {
                        body.push(1);
                        put_ad(&mut body, ad);
                    }
                    None => body.push(0),
                }
            }
            Message::Ping { nonce, from } | Message::Pong { nonce, from } => {
                body.extend_from_slice(&nonce.to_le_bytes());
                body.extend_from_slice(&from.0.to_le_bytes());
            }
            Message::PeerExchange { from, reply, peers } => {
                body.extend_from_slice(&from.0.to_le_bytes());
                body.push(u8::from(*reply));
                body.extend_from_slice(&(peers.len() as u16).to_le_bytes());
                for p in peers {
                    body.extend_from_slice(&p.id.0.to_le_bytes());
                    put_endpoint(&mut body, &p.addr);
                }
            }
        }
        let mut out = Vec::with_capacity(body.len() + 3);
        out.push(self.type_code());
        out.extend_from_slice(&(body.len() as u16).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let bad = |what: &str| OverlayError::Wire(what.to_string());
        let mut r = Reader::new(buf);
        let ty = r.u8().ok_or_else(|| bad("empty frame"))?;
        let len = r.u16().ok_or_else(|| bad("short header"))? as usize;
        if r.remaining() != len {
            return Err(bad("body length mismatch"));
        }
        let short = || bad("truncated body");
        let msg = match ty {
            ADVERTISE => Message::Advertise {
                request_id: r.u64().ok_or_else(short)?,
                ad: read_ad(&mut r).ok_or_else(short)?,
            },
            ADVERTISE_ACK => Message::AdvertiseAck {
                request_id: r.u64().ok_or_else(short)?,
            },
            QUERY => {
                let query_id = r.u64().ok_or_else(short)?;
                let requester = read_id(&mut r).ok_or_else(short)?;
                let service_name = r.string().ok_or_else(short)?;
                let reply_endpoint = r.endpoint().ok_or_else(short)?;
                let hop_count = r.u8().ok_or_else(short)?;
                let n = r.u8().ok_or_else(short)?;
                let visited = (0..n)
                    .map(|_| read_id(&mut r))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(short)?;
                Message::Query(BindingQuery {
                    query_id,
                    requester,
                    service_name,
                    reply_endpoint,
                    hop_count,
                    visited,
                })
            }
            ANSWER => {
                let query_id = r.u64().ok_or_else(short)?;
                let advertisement = match r.u8().ok_or_else(short)? {
                    0 => None,
                    1 => Some(read_ad(&mut r).ok_or_else(short)?),
                    _ => return Err(bad("bad answer status")),
                };
                Message::Answer(BindingAnswer {
                    query_id,
                    advertisement,
                })
            }
            PING | PONG => {
                let nonce = r.u64().ok_or_else(short)?;
                let from = read_id(&mut r).ok_or_else(short)?;
                if ty == PING {
                    Message::Ping { nonce, from }
                } else {
                    Message::Pong { nonce, from }
                }
            }
            PEER_EXCHANGE => {
                let from = read_id(&mut r).ok_or_else(short)?;
                let reply = r.u8().ok_or_else(short)? != 0;
                let n = r.u16().ok_or_else(short)?;
                let peers = (0..n)
                    .map(|_| {
                        Some(PeerRecord {
                            id: read_id(&mut r)?,
                            addr: r.endpoint()?,
                        })
                    })
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(short)?;
                Message::PeerExchange { from, reply, peers }
            }
            other => return Err(bad(&format!("unknown message type {other}"))),
        };
        if r.remaining() != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(msg)
    }
}

fn read_id(r: &mut Reader<'_>) -> Option<NodeId> {
    NodeId::new(r.u128()?)
}

fn put_ad(out: &mut Vec<u8>, ad: &Advertisement) {
    out.extend_from_slice(&ad.node_id.0.to_le_bytes());
    put_string(out, &ad.service_name);
    out.extend_from_slice(&(ad.endpoints.len() as u16).to_le_bytes());
    for ep in &ad.endpoints {
        put_endpoint(out, ep);
    }
    out.extend_from_slice(&ad.issued_at.as_micros().to_le_bytes());
    out.extend_from_slice(&ad.ttl.as_micros().to_le_bytes());
}

fn read_ad(r: &mut Reader<'_>) -> Option<Advertisement> {
    let node_id = read_id(r)?;
    let service_name = r.string()?;
    let n = r.u16()?;
    let endpoints = (0..n).map(|_| r.endpoint()).collect::<Option<Vec<_>>>()?;
    let issued_at = SimTime(r.u64()?);
    let ttl = SimTime(r.u64()?);
    Advertisement::new(node_id, service_name, endpoints, issued_at, ttl).ok()
}
