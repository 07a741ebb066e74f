use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::{Ipv4Addr, SocketAddrV4};

use crate::codec::{self, EncoderConfig};
use crate::metrics::QualityReport;
use crate::net::{Endpoint, SimTime};
use crate::overlay::{
    Advertisement, EdgeEvent, NodeId, OverlayConfig, OverlayError, QueryOutcome, SUPER_PORT,
};
use crate::simnet::{Action, Scenario, SimLink, Simulator};
use crate::transfer::{TransferConfig, TransferError, TransferEvent};

use super::{parse_video, Dims, GridError, GridHost, Result};

/// Name of the super node created by [`Grid::triangle`].
pub const HUB: &str = "hub";

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub overlay: OverlayConfig,
    pub transfer: TransferConfig,
    /// Pre-shared handshake key.
    pub key: Vec<u8>,
    /// Longest simulated time any blocking operation may take.
    pub op_timeout: SimTime,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            overlay: OverlayConfig::default(),
            transfer: TransferConfig::default(),
            key: b"mmgp-grid".to_vec(),
            op_timeout: SimTime::from_secs(600),
        }
    }
}

/// An established session from the requester's point of view.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub session_id: u32,
    pub endpoint: Endpoint,
    /// Every endpoint tried, with the reason it failed; the last entry is
    /// the one that succeeded.
    pub attempts: Vec<(Endpoint, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CopyOption {
    /// Raw bytes.
    Udt,
    /// Encode with the codec before sending and decode on arrival.
    Compress(EncoderConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopyRequest {
    /// Node that downloads.
    pub requester: String,
    /// Node expected to serve the content, if it matters.
    pub peer: Option<String>,
    pub service: String,
    pub option: CopyOption,
    /// Dimensions for raw luma sources when compressing.
    pub dims: Option<Dims>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub endpoint: Endpoint,
    pub source_bytes: u64,
    /// Bytes handed to the transfer engine.
    pub stream_bytes: u64,
    /// DATA bytes put on the wire, headers and retransmissions included.
    pub wire_data_bytes: u64,
    pub data_packets: u64,
    pub retransmits: u64,
    pub naks: u64,
    /// Sender rate after every change, starting with the initial rate.
    pub rate_trace: Vec<f64>,
    pub duration: SimTime,
    pub quality: Option<QualityReport>,
    /// What the requester ends up with.
    pub output: Vec<u8>,
}

pub struct Grid {
    sim: Simulator<GridHost>,
    names: BTreeMap<String, Ipv4Addr>,
    config: GridConfig,
}

impl Grid {
    pub fn new(config: GridConfig) -> Result<Self> {
        config.overlay.validate()?;
        config.transfer.validate()?;
        Ok(Self {
            sim: Simulator::new(),
            names: BTreeMap::new(),
            config,
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    /// Hosts, links and super-node bootstrap lists from a scenario. Edge
    /// nodes use the super nodes they are linked to, or all of them when
    /// linked to none; super nodes start out knowing their linked peers.
    pub fn from_scenario(sc: &Scenario, config: GridConfig) -> Result<Self> {
        let mut grid = Self::new(config)?;
        let linked = |name: &str| -> Vec<&str> {
            sc.links
                .iter()
                .filter_map(|l| {
                    if l.a == name {
                        Some(l.b.as_str())
                    } else if l.b == name {
                        Some(l.a.as_str())
                    } else {
                        None
                    }
                })
                .filter(|other| sc.node(other).is_some_and(|n| n.super_node))
                .collect()
        };
        let all_supers: Vec<&str> = sc.nodes.iter().filter(|n| n.super_node).map(|n| n.name.as_str()).collect();
        for n in &sc.nodes {
            let mut supers = linked(&n.name);
            if supers.is_empty() {
                supers = all_supers.clone();
            }
            let eps: Vec<Endpoint> = supers
                .iter()
                .filter_map(|s| sc.ip_of(s))
                .map(|ip| SocketAddrV4::new(ip, SUPER_PORT))
                .collect();
            grid.add_host_at(&n.name, n.ip, n.super_node, eps)?;
        }
        for l in &sc.links {
            grid.add_link(&l.a, &l.b, l.link.clone())?;
            let both_super = [&l.a, &l.b].iter().all(|x| sc.node(x).is_some_and(|n| n.super_node));
            if both_super {
                grid.introduce(&l.a, &l.b)?;
                grid.introduce(&l.b, &l.a)?;
            }
        }
        grid.start_supers();
        Ok(grid)
    }

    /// One super node `hub` and two edges joined by `link`; the hub links
    /// are fixed 1 ms lossless links.
    pub fn triangle(config: GridConfig, server: &str, requester: &str, link: SimLink) -> Result<Self> {
        let mut grid = Self::new(config)?;
        grid.add_host(HUB, true, &[])?;
        grid.add_host(server, false, &[HUB])?;
        grid.add_host(requester, false, &[HUB])?;
        grid.add_link(HUB, server, SimLink::fixed_ms(1))?;
        grid.add_link(HUB, requester, SimLink::fixed_ms(1))?;
        grid.add_link(server, requester, link)?;
        grid.start_supers();
        Ok(grid)
    }

    fn add_host_at(&mut self, name: &str, ip: Ipv4Addr, super_node: bool, supers: Vec<Endpoint>) -> Result<()> {
        if self.names.contains_key(name) {
            return Err(GridError::Sim(crate::simnet::SimError::DuplicateNode(ip)));
        }
        let host = GridHost::new(
            name,
            ip,
            super_node,
            supers,
            self.config.overlay.clone(),
            self.config.transfer.clone(),
            &self.config.key,
        );
        self.sim.add_node(ip, host)?;
        self.names.insert(name.to_string(), ip);
        Ok(())
    }

    /// Adds a host at the next free `10.0.x.y` address.
    pub fn add_host(&mut self, name: &str, super_node: bool, supers: &[&str]) -> Result<Ipv4Addr> {
        let n = self.names.len() as u32 + 1;
        let ip = Ipv4Addr::new(10, 0, (n >> 8) as u8, (n & 0xff) as u8);
        let eps = supers
            .iter()
            .map(|s| self.ip(s).map(|ip| SocketAddrV4::new(ip, SUPER_PORT)))
            .collect::<Result<Vec<_>>>()?;
        self.add_host_at(name, ip, super_node, eps)?;
        Ok(ip)
    }

    /// Replaces the overlay key used by a single host, for credential tests.
    pub fn set_key(&mut self, name: &str, key: &[u8]) -> Result<()> {
        let ip = self.ip(name)?;
        let host = self.sim.node_mut(ip).expect("registered");
        let mut stack = crate::transfer::TransferStack::new(ip, key, self.config.transfer.clone());
        for port in host.overlay.edge.pipe_ports() {
            stack.listen(port);
        }
        host.transfer = stack;
        Ok(())
    }

    pub fn add_link(&mut self, a: &str, b: &str, link: SimLink) -> Result<()> {
        let (a, b) = (self.ip(a)?, self.ip(b)?);
        self.sim.add_link(a, b, link)?;
        Ok(())
    }

    /// Tells super node `a` about super node `b`.
    pub fn introduce(&mut self, a: &str, b: &str) -> Result<()> {
        let (ia, ib) = (self.ip(a)?, self.ip(b)?);
        let id_b = self.host(b)?.id();
        let now = self.sim.now();
        if let Some(s) = self.sim.node_mut(ia).and_then(|h| h.overlay.super_node.as_mut()) {
            s.add_peer(id_b, SocketAddrV4::new(ib, SUPER_PORT), now);
        }
        Ok(())
    }

    pub fn start_supers(&mut self) {
        for ip in self.sim.node_addrs() {
            let _ = self.sim.with_node(ip, |h, ctx| {
                h.with_overlay(ctx, |o, c| {
                    if let Some(s) = o.super_node.as_mut() {
                        s.start(c);
                    }
                })
            });
        }
    }

    pub fn ip(&self, name: &str) -> Result<Ipv4Addr> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| GridError::UnknownNode(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.keys().map(String::as_str)
    }

    pub fn host(&self, name: &str) -> Result<&GridHost> {
        let ip = self.ip(name)?;
        Ok(self.sim.node(ip).expect("registered"))
    }

    pub fn host_mut(&mut self, name: &str) -> Result<&mut GridHost> {
        let ip = self.ip(name)?;
        Ok(self.sim.node_mut(ip).expect("registered"))
    }

    fn host_by_ip(&self, ip: Ipv4Addr) -> Option<&GridHost> {
        self.sim.node(ip)
    }

    pub fn sim(&self) -> &Simulator<GridHost> {
        &self.sim
    }

    pub fn sim_mut(&mut self) -> &mut Simulator<GridHost> {
        &mut self.sim
    }

    pub fn now(&self) -> SimTime {
        self.sim.now()
    }

    pub fn advance(&mut self, by: SimTime) {
        let until = self.sim.now() + by;
        self.sim.advance(until);
    }

    fn deadline(&self) -> SimTime {
        self.sim.now() + self.config.op_timeout
    }

    /// Makes `content` available as `service` on `node`, creating the input
    /// pipe on first use.
    pub fn serve(&mut self, node: &str, service: &str, content: Vec<u8>) -> Result<Endpoint> {
        let host = self.host_mut(node)?;
        let ep = match host.overlay.edge.pipe(service) {
            Some(eps) => eps[0],
            None => host.overlay.edge.create_input_pipe(service)?,
        };
        host.transfer.listen(ep.port());
        host.files.insert(service.to_string(), content);
        Ok(ep)
    }

    pub fn withdraw(&mut self, node: &str, service: &str) -> Result<bool> {
        let host = self.host_mut(node)?;
        if let Some(eps) = host.overlay.edge.pipe(service) {
            for ep in eps {
                host.transfer.unlisten(ep.port());
            }
        }
        host.files.remove(service);
        Ok(host.overlay.edge.withdraw(service))
    }

    fn start_publish(&mut self, node: &str, service: &str) -> Result<u64> {
        let ip = self.ip(node)?;
        let id = self
            .sim
            .with_node(ip, |h, ctx| h.with_overlay(ctx, |o, c| o.edge.publish(c, service)))??;
        Ok(id)
    }

    fn start_query(&mut self, node: &str, service: &str) -> Result<u64> {
        let ip = self.ip(node)?;
        let id = self
            .sim
            .with_node(ip, |h, ctx| h.with_overlay(ctx, |o, c| o.edge.query(c, service)))??;
        Ok(id)
    }

    fn publish_result(&self, ip: Ipv4Addr, request_id: u64) -> Option<std::result::Result<(), OverlayError>> {
        self.sim.node(ip)?.overlay.edge.events().iter().find_map(|e| match e {
            EdgeEvent::Published { request_id: r, .. } if *r == request_id => Some(Ok(())),
            EdgeEvent::PublishFailed { request_id: r, error, .. } if *r == request_id => Some(Err(error.clone())),
            _ => None,
        })
    }

    fn query_result(&self, ip: Ipv4Addr, query_id: u64) -> Option<QueryOutcome> {
        self.sim.node(ip)?.overlay.edge.events().iter().find_map(|e| match e {
            EdgeEvent::QueryResolved { query_id: q, outcome, .. } if *q == query_id => Some(outcome.clone()),
            _ => None,
        })
    }

    /// Publishes and waits for the super node's acknowledgement.
    pub fn publish(&mut self, node: &str, service: &str) -> Result<()> {
        let ip = self.ip(node)?;
        let id = self.start_publish(node, service)?;
        let deadline = self.deadline();
        self.sim.run_until(deadline, |sim| {
            sim.node(ip).is_some_and(|h| {
                h.overlay.edge.events().iter().any(|e| {
                    matches!(e, EdgeEvent::Published { request_id, .. } | EdgeEvent::PublishFailed { request_id, .. } if *request_id == id)
                })
            })
        });
        match self.publish_result(ip, id) {
            Some(Ok(())) => Ok(()),
            Some(Err(e)) => Err(e.into()),
            None => Err(GridError::Timeout(self.config.op_timeout)),
        }
    }

    /// Queries the overlay and waits for the answer.
    pub fn query(&mut self, node: &str, service: &str) -> Result<Advertisement> {
        let ip = self.ip(node)?;
        let id = self.start_query(node, service)?;
        let deadline = self.deadline();
        let mut outcome = None;
        let done = self.sim.run_until(deadline, |sim| {
            sim.node(ip)
                .map(|h| {
                    h.overlay.edge.events().iter().any(|e| matches!(e, EdgeEvent::QueryResolved { query_id, .. } if *query_id == id))
                })
                .unwrap_or(false)
        });
        if done {
            outcome = self.query_result(ip, id);
        }
        match outcome {
            Some(QueryOutcome::Found(ad)) => Ok(ad),
            Some(QueryOutcome::NotFound) => Err(OverlayError::NotFound(service.to_string()).into()),
            _ => Err(OverlayError::QueryTimeout(service.to_string()).into()),
        }
    }

    fn transfer_event(&self, ip: Ipv4Addr, session_id: u32, f: impl Fn(&TransferEvent) -> bool) -> Option<TransferEvent> {
        self.sim
            .node(ip)?
            .transfer
            .events()
            .iter()
            .find(|e| event_session(e) == Some(session_id) && f(e))
            .cloned()
    }

    /// Handshakes with the advertised endpoints in order until one accepts.
    pub fn establish_connection(&mut self, node: &str, ad: &Advertisement) -> Result<Connection> {
        if ad.endpoints.is_empty() {
            return Err(OverlayError::InvalidInput("advertisement has no endpoints".into()).into());
        }
        let ip = self.ip(node)?;
        let mut attempts = Vec::new();
        for &ep in &ad.endpoints {
            let sid = self
                .sim
                .with_node(ip, |h, ctx| h.with_transfer(ctx, |t, c| t.connect(c, ep)))?;
            let deadline = self.deadline();
            self.sim.run_until(deadline, |sim| {
                sim.node(ip).is_some_and(|h| {
                    h.transfer.events().iter().any(|e| {
                        matches!(e, TransferEvent::Connected { session_id, .. } | TransferEvent::ConnectFailed { session_id, .. } if *session_id == sid)
                    })
                })
            });
            match self.transfer_event(ip, sid, |e| {
                matches!(e, TransferEvent::Connected { .. } | TransferEvent::ConnectFailed { .. })
            }) {
                Some(TransferEvent::Connected { .. }) => {
                    attempts.push((ep, "connected".to_string()));
                    return Ok(Connection {
                        session_id: sid,
                        endpoint: ep,
                        attempts,
                    });
                }
                Some(TransferEvent::ConnectFailed {
                    error: e @ TransferError::AuthFailed(_),
                    ..
                }) => return Err(e.into()),
                Some(TransferEvent::ConnectFailed { error, .. }) => attempts.push((ep, error.to_string())),
                _ => {
                    self.sim.node_mut(ip).expect("registered").transfer.close(sid);
                    attempts.push((ep, "timed out".to_string()));
                }
            }
        }
        Err(OverlayError::ConnectFailed { attempts }.into())
    }

    /// Resolves `service`, connects to the advertiser and streams the content
    /// to the requester. Session state is released on both ends whatever the
    /// outcome.
    pub fn mmgp_copy(&mut self, req: &CopyRequest) -> Result<TransferReport> {
        let ad = self.query(&req.requester, &req.service)?;
        if let Some(peer) = &req.peer {
            if ad.node_id != NodeId::from_name(peer) {
                return Err(OverlayError::NotFound(format!("{peer}/{}", req.service)).into());
            }
        }
        let conn = self.establish_connection(&req.requester, &ad)?;
        let server_ip = *conn.endpoint.ip();
        let client_ip = self.ip(&req.requester)?;
        let result = self.copy_over(req, &conn, server_ip, client_ip);
        for ip in [server_ip, client_ip] {
            if let Some(h) = self.sim.node_mut(ip) {
                h.transfer.close(conn.session_id);
            }
        }
        result
    }

    fn copy_over(
        &mut self,
        req: &CopyRequest,
        conn: &Connection,
        server_ip: Ipv4Addr,
        client_ip: Ipv4Addr,
    ) -> Result<TransferReport> {
        let sid = conn.session_id;
        let server = self.host_by_ip(server_ip).ok_or(GridError::NotServed(conn.endpoint))?;
        let content = server
            .overlay
            .edge
            .service_at(conn.endpoint)
            .and_then(|s| server.files.get(s))
            .cloned()
            .ok_or(GridError::NotServed(conn.endpoint))?;

        let (stream, source) = match &req.option {
            CopyOption::Udt => (content.clone(), None),
            CopyOption::Compress(cfg) => {
                let video = parse_video(&content, req.dims)?;
                (codec::encode_to_bytes(&video, cfg)?, Some(video))
            }
        };
        let stream_len = stream.len() as u64;
        self.sim
            .with_node(server_ip, |h, ctx| h.with_transfer(ctx, |t, c| t.send_stream(c, sid, stream)))??;

        let deadline = self.deadline();
        let finished = |sim: &Simulator<GridHost>| {
            let has = |ip: Ipv4Addr, f: &dyn Fn(&TransferEvent) -> bool| {
                sim.node(ip).is_some_and(|h| h.transfer.events().iter().any(|e| event_session(e) == Some(sid) && f(e)))
            };
            let aborted = |e: &TransferEvent| matches!(e, TransferEvent::Aborted { .. });
            (has(server_ip, &|e| matches!(e, TransferEvent::SendComplete { .. }))
                && has(client_ip, &|e| matches!(e, TransferEvent::ReceiveComplete { .. })))
                || has(server_ip, &aborted)
                || has(client_ip, &aborted)
        };
        if !self.sim.run_until(deadline, finished) {
            return Err(GridError::Timeout(self.config.op_timeout));
        }
        for ip in [server_ip, client_ip] {
            if let Some(TransferEvent::Aborted { error, .. }) =
                self.transfer_event(ip, sid, |e| matches!(e, TransferEvent::Aborted { .. }))
            {
                return Err(error.into());
            }
        }

        let info = self
            .sim
            .node(server_ip)
            .and_then(|h| h.transfer.session(sid))
            .ok_or(TransferError::UnknownSession(sid))?;
        let stats = info.sender.unwrap_or_default();
        let duration = match (info.started_at, info.finished_at) {
            (Some(a), Some(b)) => b - a,
            _ => SimTime::ZERO,
        };
        let received = self
            .sim
            .node_mut(client_ip)
            .and_then(|h| h.transfer.take_received(sid))
            .unwrap_or_default();

        let (output, quality) = match source {
            None => (received, None),
            Some(original) => {
                let decoded = codec::decode_from_bytes(&received)?;
                let q = QualityReport::compute(&original, &decoded, original.raw_size() as u64, received.len() as u64)
                    .map_err(|e| codec::CodecError::InvalidInput(e.to_string()))?;
                let out = if content.starts_with(b"P5") {
                    codec::io::to_pgm_sequence(&decoded)
                } else {
                    decoded.to_planes()
                };
                (out, Some(q))
            }
        };
        Ok(TransferReport {
            endpoint: conn.endpoint,
            source_bytes: content.len() as u64,
            stream_bytes: stream_len,
            wire_data_bytes: stats.data_wire_bytes,
            data_packets: stats.data_packets,
            retransmits: stats.retransmits,
            naks: stats.naks_received,
            rate_trace: stats.rate_trace,
            duration,
            quality,
            output,
        })
    }

    /// Applies a scenario's timed actions, lets the network settle and
    /// describes the outcome of each action, one line per action.
    pub fn run_scenario(&mut self, sc: &Scenario, settle: SimTime) -> Result<Vec<String>> {
        enum Pending {
            Publish(Ipv4Addr, u64),
            Query(Ipv4Addr, u64),
            Done(String),
        }
        let mut pending = Vec::new();
        for step in &sc.actions {
            if step.at > self.sim.now() {
                self.sim.advance(step.at);
            }
            let label = describe(&step.action);
            let p = match &step.action {
                Action::Publish { node, service, file } => {
                    let content = match file {
                        Some(path) => std::fs::read(path).map_err(codec::CodecError::from)?,
                        None => Vec::new(),
                    };
                    self.serve(node, service, content)?;
                    match self.start_publish(node, service) {
                        Ok(id) => Pending::Publish(self.ip(node)?, id),
                        Err(e) => Pending::Done(format!("failed: {e}")),
                    }
                }
                Action::Withdraw { node, service } => {
                    let had = self.withdraw(node, service)?;
                    Pending::Done(if had { "withdrawn".into() } else { "not served".into() })
                }
                Action::Query { node, service } => match self.start_query(node, service) {
                    Ok(id) => Pending::Query(self.ip(node)?, id),
                    Err(e) => Pending::Done(format!("failed: {e}")),
                },
                Action::Down(n) => {
                    let ip = self.ip(n)?;
                    self.sim.set_node_down(ip, true)?;
                    Pending::Done("ok".into())
                }
                Action::Up(n) => {
                    let ip = self.ip(n)?;
                    self.sim.set_node_down(ip, false)?;
                    Pending::Done("ok".into())
                }
                Action::Partition(a, b) => {
                    let (a, b) = (self.ip(a)?, self.ip(b)?);
                    self.sim.partition(a, b);
                    Pending::Done("ok".into())
                }
                Action::Heal(a, b) => {
                    let (a, b) = (self.ip(a)?, self.ip(b)?);
                    self.sim.heal(a, b);
                    Pending::Done("ok".into())
                }
            };
            pending.push((step.at, label, p));
        }
        self.advance(settle);
        let mut lines = Vec::new();
        for (at, label, p) in pending {
            let outcome = match p {
                Pending::Done(s) => s,
                Pending::Publish(ip, id) => match self.publish_result(ip, id) {
                    Some(Ok(())) => "published".into(),
                    Some(Err(e)) => format!("failed: {e}"),
                    None => "pending".into(),
                },
                Pending::Query(ip, id) => match self.query_result(ip, id) {
                    Some(QueryOutcome::Found(ad)) => {
                        let eps: Vec<String> = ad.endpoints.iter().map(|e| e.to_string()).collect();
                        format!("found {}", eps.join(" "))
                    }
                    Some(QueryOutcome::NotFound) => "not-found".into(),
                    Some(QueryOutcome::TimedOut) => "timeout".into(),
                    None => "pending".into(),
                },
            };
            let mut line = String::new();
            let _ = write!(line, "{:.3} {label} -> {outcome}", at.as_millis_f64());
            lines.push(line);
        }
        Ok(lines)
    }
}

fn describe(action: &Action) -> String {
    match action {
        Action::Publish { node, service, .. } => format!("publish {node} {service}"),
        Action::Withdraw { node, service } => format!("withdraw {node} {service}"),
        Action::Query { node, service } => format!("query {node} {service}"),
        Action::Down(n) => format!("down {n}"),
        Action::Up(n) => format!("up {n}"),
        Action::Partition(a, b) => format!("partition {a} {b}"),
        Action::Heal(a, b) => format!("heal {a} {b}"),
    }
}

fn event_session(e: &TransferEvent) -> Option<u32> {
    match e {
        TransferEvent::Connected { session_id, .. }
        | TransferEvent::ConnectFailed { session_id, .. }
        | TransferEvent::Accepted { session_id, .. }
        | TransferEvent::SendComplete { session_id }
        | TransferEvent::ReceiveComplete { session_id }
        | TransferEvent::Aborted { session_id, .. } => Some(*session_id),
        TransferEvent::Refused { .. } => None,
    }
}
