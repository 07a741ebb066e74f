//! Discovery overlay: edge nodes publish service advertisements to super
//! nodes, which keep peer lists alive by ping and anti-entropy exchange and
//! route binding queries greedily towards the service's hash key.

mod edge;
mod super_node;
pub mod wire;

use std::fmt;
use std::net::{Ipv4Addr, SocketAddrV4};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::net::{Context, Endpoint, Envelope, Node, SimTime};

pub use edge::{EdgeEvent, EdgeNode, QueryOutcome};
pub use super_node::{PeerEntry, RouteDecision, StoredAd, SuperNode};
pub use wire::{Message, PeerRecord};

/// Control port of a super node.
pub const SUPER_PORT: u16 = 7400;
/// Control port of an edge node.
pub const EDGE_PORT: u16 = 7401;
/// First port handed out to input pipes.
pub const FIRST_PIPE_PORT: u16 = 9000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OverlayError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("service {0:?} already exists on this node")]
    AlreadyExists(String),
    #[error("discovery timeout publishing {service:?} after {attempts} attempts")]
    DiscoveryTimeout { service: String, attempts: u32 },
    #[error("not-found: {0}")]
    NotFound(String),
    #[error("query for {0:?} timed out")]
    QueryTimeout(String),
    #[error("connect failed after {} attempts: {}", attempts.len(), format_attempts(attempts))]
    ConnectFailed { attempts: Vec<(Endpoint, String)> },
    #[error("malformed message: {0}")]
    Wire(String),
}

fn format_attempts(attempts: &[(Endpoint, String)]) -> String {
    attempts
        .iter()
        .map(|(ep, why)| format!("{ep} ({why})"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, OverlayError>;

/// Non-zero 128-bit node identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u128);

impl NodeId {
    pub fn new(raw: u128) -> Option<Self> {
        (raw != 0).then_some(Self(raw))
    }

    /// Stable identifier derived from a node name.
    pub fn from_name(name: &str) -> Self {
        let digest = Sha256::digest(name.as_bytes());
        let raw = u128::from_le_bytes(digest[..16].try_into().unwrap());
        Self(raw.max(1))
    }

    pub fn get(self) -> u128 {
        self.0
    }

    /// Distance from this node to a bucket key in the 64-bit key space.
    pub fn distance(self, key: u64) -> u64 {
        ((self.0 >> 64) as u64) ^ key
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

/// FNV-1a 64 over the UTF-8 bytes of the service name.
pub fn hash_service(service_name: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    service_name
        .bytes()
        .fold(OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Advertisement {
    pub node_id: NodeId,
    pub service_name: String,
    pub endpoints: Vec<Endpoint>,
    pub issued_at: SimTime,
    pub ttl: SimTime,
}

impl Advertisement {
    pub fn new(
        node_id: NodeId,
        service_name: String,
        endpoints: Vec<Endpoint>,
        issued_at: SimTime,
        ttl: SimTime,
    ) -> Result<Self> {
        if service_name.is_empty() {
            return Err(OverlayError::InvalidInput("empty service name".into()));
        }
        if endpoints.is_empty() {
            return Err(OverlayError::InvalidInput("advertisement without endpoints".into()));
        }
        Ok(Self {
            node_id,
            service_name,
            endpoints,
            issued_at,
            ttl,
        })
    }

    pub fn is_expired(&self, now: SimTime) -> bool {
        now > self.issued_at + self.ttl
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindingQuery {
    pub query_id: u64,
    pub requester: NodeId,
    pub service_name: String,
    pub reply_endpoint: Endpoint,
    pub hop_count: u8,
    /// Super nodes that already handled this query, in order.
    pub visited: Vec<NodeId>,
}

/// `advertisement == None` is a not-found answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindingAnswer {
    pub query_id: u64,
    pub advertisement: Option<Advertisement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayConfig {
    pub ping_period: SimTime,
    pub ping_timeout: SimTime,
    pub ping_subset: usize,
    pub purge_threshold: u32,
    pub ad_ttl: SimTime,
    pub max_hops: u8,
    pub publish_timeout: SimTime,
    pub publish_retries: u32,
    pub query_timeout: SimTime,
    /// Edge nodes refresh their advertisements every `ad_ttl / 2`.
    pub auto_republish: bool,
    pub seed: u64,
}

impl Default for OverlayConfig {
    fn default() -> Self {
        Self {
            ping_period: SimTime::from_secs(1),
            ping_timeout: SimTime::from_millis(500),
            ping_subset: 3,
            purge_threshold: 3,
            ad_ttl: SimTime::from_secs(60),
            max_hops: 8,
            publish_timeout: SimTime::from_millis(500),
            publish_retries: 3,
            query_timeout: SimTime::from_secs(2),
            auto_republish: true,
            seed: 0,
        }
    }
}

impl OverlayConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(OverlayError::InvalidInput(m.to_string()));
        if self.ping_period == SimTime::ZERO {
            return bad("ping period must be positive");
        }
        if self.ping_timeout == SimTime::ZERO || self.ping_timeout >= self.ping_period {
            return bad("ping timeout must be positive and shorter than the ping period");
        }
        if self.ping_subset == 0 {
            return bad("ping subset must be at least 1");
        }
        if self.purge_threshold == 0 {
            return bad("purge threshold must be at least 1");
        }
        if self.ad_ttl == SimTime::ZERO {
            return bad("advertisement ttl must be positive");
        }
        if self.max_hops == 0 {
            return bad("max hops must be at least 1");
        }
        if self.publish_timeout == SimTime::ZERO || self.query_timeout == SimTime::ZERO {
            return bad("timeouts must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OverlayTimer {
    Tick,
    PingTimeout { round: u64 },
    PublishTimeout { request_id: u64 },
    QueryTimeout { query_id: u64 },
    Republish { service: String },
}

/// A host's overlay roles: an edge node, plus a super node when the host
/// was launched as one. Messages are routed by destination port.
#[derive(Debug)]
pub struct OverlayHost {
    pub super_node: Option<SuperNode>,
    pub edge: EdgeNode,
}

impl OverlayHost {
    /// An edge-only host attached to the given super nodes.
    pub fn edge(id: NodeId, ip: Ipv4Addr, supers: Vec<Endpoint>, config: OverlayConfig) -> Self {
        Self {
            super_node: None,
            edge: EdgeNode::new(id, ip, supers, config),
        }
    }

    /// A super node whose local edge publishes to itself.
    pub fn super_node(id: NodeId, ip: Ipv4Addr, config: OverlayConfig) -> Self {
        let local = SocketAddrV4::new(ip, SUPER_PORT);
        Self {
            super_node: Some(SuperNode::new(id, config.clone())),
            edge: EdgeNode::new(id, ip, vec![local], config),
        }
    }

    pub fn is_super(&self) -> bool {
        self.super_node.is_some()
    }

    pub fn handles_port(port: u16) -> bool {
        port == SUPER_PORT || port == EDGE_PORT
    }
}

impl Node for OverlayHost {
    type Timer = OverlayTimer;

    fn on_message(&mut self, ctx: &mut Context<OverlayTimer>, env: Envelope) {
        match env.dst.port() {
            SUPER_PORT => {
                if let Some(s) = self.super_node.as_mut() {
                    s.handle(ctx, env);
                }
            }
            EDGE_PORT => self.edge.handle(ctx, env),
            _ => {}
        }
    }

    fn on_timer(&mut self, ctx: &mut Context<OverlayTimer>, timer: OverlayTimer) {
        match timer {
            OverlayTimer::Tick | OverlayTimer::PingTimeout { .. } => {
                if let Some(s) = self.super_node.as_mut() {
                    s.on_timer(ctx, timer);
                }
            }
            other => self.edge.on_timer(ctx, other),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv1a_reference_vectors() {
        assert_eq!(hash_service(""), 0xcbf29ce484222325);
        assert_eq!(hash_service("a"), 0xaf63dc4c8601ec8c);
        assert_eq!(hash_service("foobar"), 0x85944171f73967e8);
        assert_ne!(hash_service("a"), hash_service("b"));
        assert_eq!(hash_service("video/stream"), hash_service("video/stream"));
    }

    #[test]
    fn video_stream_matches_bytewise_oracle() {
        let mut h: u64 = 14695981039346656037;
        for b in "video/stream".as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(1099511628211);
        }
        assert_eq!(hash_service("video/stream"), h);
    }

    #[test]
    fn node_ids_are_nonzero_and_stable() {
        assert!(NodeId::new(0).is_none());
        assert_eq!(NodeId::from_name("a"), NodeId::from_name("a"));
        assert_ne!(NodeId::from_name("a"), NodeId::from_name("b"));
    }

    #[test]
    fn advertisement_invariants() {
        let id = NodeId::from_name("n");
        let ep: Endpoint = "10.0.0.1:9000".parse().unwrap();
        assert!(Advertisement::new(id, "".into(), vec![ep], SimTime::ZERO, SimTime(1)).is_err());
        assert!(Advertisement::new(id, "s".into(), vec![], SimTime::ZERO, SimTime(1)).is_err());
        let ad = Advertisement::new(id, "s".into(), vec![ep], SimTime(10), SimTime(5)).unwrap();
        assert!(!ad.is_expired(SimTime(15)));
        assert!(ad.is_expired(SimTime(16)));
    }

    #[test]
    fn default_config_is_valid() {
        OverlayConfig::default().validate().unwrap();
        let c = OverlayConfig { ping_timeout: SimTime::from_secs(2), ..Default::default() };
        assert!(c.validate().is_err());
    }
}
