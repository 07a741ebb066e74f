use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddrV4;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::net::{Context, Endpoint, Envelope, Node, SimTime};

use super::wire::{Message, PeerRecord};
use super::{
    hash_service, Advertisement, BindingAnswer, BindingQuery, NodeId, OverlayConfig, OverlayTimer,
    SUPER_PORT,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerEntry {
    pub id: NodeId,
    pub addr: Endpoint,
    pub last_seen: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredAd {
    pub ad: Advertisement,
    /// Control endpoint the advertisement arrived from.
    pub origin: Endpoint,
}

/// One routing decision, kept for inspection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouteDecision {
    Matched { query_id: u64, hop_count: u8 },
    Forwarded { query_id: u64, hop_count: u8, to: NodeId },
    NotFound { query_id: u64, hop_count: u8 },
}

#[derive(Debug)]
pub struct SuperNode {
    id: NodeId,
    config: OverlayConfig,
    peers: Vec<PeerEntry>,
    ad_table: BTreeMap<u64, Vec<StoredAd>>,
    ping_failures: BTreeMap<NodeId, u32>,
    tombstones: BTreeSet<NodeId>,
    outstanding: BTreeMap<u64, (NodeId, u64)>,
    round: u64,
    next_nonce: u64,
    rng: ChaCha8Rng,
    routes: Vec<RouteDecision>,
    purged: Vec<(SimTime, NodeId)>,
}

impl SuperNode {
    pub fn new(id: NodeId, config: OverlayConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed ^ (id.get() as u64));
        Self {
            id,
            config,
            peers: Vec::new(),
            ad_table: BTreeMap::new(),
            ping_failures: BTreeMap::new(),
            tombstones: BTreeSet::new(),
            outstanding: BTreeMap::new(),
            round: 0,
            next_nonce: 1,
            rng,
            routes: Vec::new(),
            purged: Vec::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn config(&self) -> &OverlayConfig {
        &self.config
    }

    pub fn peers(&self) -> &[PeerEntry] {
        &self.peers
    }

    pub fn peer_ids(&self) -> Vec<NodeId> {
        self.peers.iter().map(|p| p.id).collect()
    }

    pub fn ping_failures(&self, id: NodeId) -> u32 {
        self.ping_failures.get(&id).copied().unwrap_or(0)
    }

    pub fn ad_table(&self) -> &BTreeMap<u64, Vec<StoredAd>> {
        &self.ad_table
    }

    pub fn ad_count(&self) -> usize {
        self.ad_table.values().map(Vec::len).sum()
    }

    /// Live advertisements for `service`.
    pub fn lookup(&self, service: &str, now: SimTime) -> Vec<&StoredAd> {
        self.ad_table
            .get(&hash_service(service))
            .into_iter()
            .flatten()
            .filter(|s| s.ad.service_name == service && !s.ad.is_expired(now))
            .collect()
    }

    pub fn routes(&self) -> &[RouteDecision] {
        &self.routes
    }

    pub fn purged(&self) -> &[(SimTime, NodeId)] {
        &self.purged
    }

    /// Adds a known super node. Direct knowledge overrides an earlier purge.
    pub fn add_peer(&mut self, id: NodeId, addr: Endpoint, now: SimTime) {
        if id == self.id {
            return;
        }
        self.tombstones.remove(&id);
        match self.peers.binary_search_by_key(&id, |p| p.id) {
            Ok(i) => {
                self.peers[i].addr = addr;
                self.peers[i].last_seen = now;
            }
            Err(i) => {
                self.peers.insert(
                    i,
                    PeerEntry {
                        id,
                        addr,
                        last_seen: now,
                    },
                );
                self.ping_failures.insert(id, 0);
            }
        }
    }

    fn merge_gossip(&mut self, rec: &PeerRecord, now: SimTime) {
        if rec.id == self.id || self.tombstones.contains(&rec.id) {
            return;
        }
        if self.peers.binary_search_by_key(&rec.id, |p| p.id).is_err() {
            self.add_peer(rec.id, rec.addr, now);
        }
    }

    fn purge(&mut self, id: NodeId, now: SimTime) {
        if let Ok(i) = self.peers.binary_search_by_key(&id, |p| p.id) {
            self.peers.remove(i);
        }
        self.ping_failures.remove(&id);
        self.outstanding.retain(|_, (p, _)| *p != id);
        self.tombstones.insert(id);
        self.purged.push((now, id));
    }

    /// Schedules the first maintenance tick at a seeded offset within one
    /// period.
    pub fn start(&mut self, ctx: &mut Context<OverlayTimer>) {
        let period = self.config.ping_period.as_micros();
        let jitter = rand::Rng::gen_range(&mut self.rng, 0..period);
        ctx.set_timer(SimTime(jitter), OverlayTimer::Tick);
    }

    fn resolve_pings(&mut self, upto_round: u64, now: SimTime) {
        let expired: Vec<u64> = self
            .outstanding
            .iter()
            .filter(|(_, (_, round))| *round <= upto_round)
            .map(|(n, _)| *n)
            .collect();
        for nonce in expired {
            let Some((peer, _)) = self.outstanding.remove(&nonce) else {
                continue;
            };
            let failures = self.ping_failures.entry(peer).or_default();
            *failures += 1;
            if *failures >= self.config.purge_threshold {
                self.purge(peer, now);
            }
        }
    }

    pub fn expire_ads(&mut self, now: SimTime) {
        for ads in self.ad_table.values_mut() {
            ads.retain(|s| !s.ad.is_expired(now));
        }
        self.ad_table.retain(|_, ads| !ads.is_empty());
    }

    fn send(&self, ctx: &mut Context<OverlayTimer>, to: Endpoint, msg: &Message) {
        ctx.send(SUPER_PORT, to, msg.kind(), msg.encode());
    }

    fn peer_records(&self) -> Vec<PeerRecord> {
        self.peers
            .iter()
            .map(|p| PeerRecord {
                id: p.id,
                addr: p.addr,
            })
            .collect()
    }

    pub fn maintenance_tick(&mut self, ctx: &mut Context<OverlayTimer>) {
        let now = ctx.now();
        self.resolve_pings(self.round, now);
        self.expire_ads(now);
        self.round += 1;

        // suspects are probed every round until they answer or are purged
        let (suspects, rest): (Vec<&PeerEntry>, Vec<&PeerEntry>) =
            self.peers.iter().partition(|p| self.ping_failures(p.id) > 0);
        let fill = self.config.ping_subset.saturating_sub(suspects.len());
        let mut targets: Vec<(NodeId, Endpoint)> = suspects.iter().map(|p| (p.id, p.addr)).collect();
        targets.extend(rest.choose_multiple(&mut self.rng, fill).map(|p| (p.id, p.addr)));
        for (id, addr) in targets {
            let nonce = self.next_nonce;
            self.next_nonce += 1;
            self.outstanding.insert(nonce, (id, self.round));
            self.send(ctx, addr, &Message::Ping { nonce, from: self.id });
        }

        let healthy: Vec<Endpoint> = self
            .peers
            .iter()
            .filter(|p| self.ping_failures(p.id) == 0)
            .map(|p| p.addr)
            .collect();
        let pool = if healthy.is_empty() {
            self.peers.iter().map(|p| p.addr).collect()
        } else {
            healthy
        };
        if let Some(&addr) = pool.choose(&mut self.rng) {
            let msg = Message::PeerExchange {
                from: self.id,
                reply: false,
                peers: self.peer_records(),
            };
            self.send(ctx, addr, &msg);
        }

        ctx.set_timer(self.config.ping_timeout, OverlayTimer::PingTimeout { round: self.round });
        ctx.set_timer(self.config.ping_period, OverlayTimer::Tick);
    }

    pub fn route_query(&mut self, ctx: &mut Context<OverlayTimer>, mut query: BindingQuery) {
        let now = ctx.now();
        let (query_id, hop_count) = (query.query_id, query.hop_count);
        if let Some(origin) = self.lookup(&query.service_name, now).first().map(|s| s.origin) {
            self.routes.push(RouteDecision::Matched { query_id, hop_count });
            self.send(ctx, origin, &Message::Query(query));
            return;
        }
        if !query.visited.contains(&self.id) {
            query.visited.push(self.id);
        }
        let key = hash_service(&query.service_name);
        let next = self
            .peers
            .iter()
            .filter(|p| !query.visited.contains(&p.id))
            .min_by_key(|p| (self.ping_failures(p.id) > 0, p.id.distance(key), p.id))
            .map(|p| (p.id, p.addr));
        match next {
            Some((to, addr)) if query.hop_count < self.config.max_hops => {
                query.hop_count += 1;
                self.routes.push(RouteDecision::Forwarded {
                    query_id,
                    hop_count: query.hop_count,
                    to,
                });
                self.send(ctx, addr, &Message::Query(query));
            }
            _ => {
                self.routes.push(RouteDecision::NotFound { query_id, hop_count });
                let answer = BindingAnswer {
                    query_id,
                    advertisement: None,
                };
                self.send(ctx, query.reply_endpoint, &Message::Answer(answer));
            }
        }
    }

    pub fn handle(&mut self, ctx: &mut Context<OverlayTimer>, env: Envelope) {
        let Ok(msg) = Message::decode(&env.payload) else {
            return;
        };
        let now = ctx.now();
        let peer_addr = SocketAddrV4::new(*env.src.ip(), SUPER_PORT);
        match msg {
            Message::Advertise { request_id, mut ad } => {
                ad.issued_at = now;
                let bucket = self.ad_table.entry(hash_service(&ad.service_name)).or_default();
                let stored = StoredAd { ad, origin: env.src };
                match bucket
                    .iter_mut()
                    .find(|s| s.ad.node_id == stored.ad.node_id && s.ad.service_name == stored.ad.service_name)
                {
                    Some(slot) => *slot = stored,
                    None => bucket.push(stored),
                }
                self.send(ctx, env.src, &Message::AdvertiseAck { request_id });
            }
            Message::Query(q) => self.route_query(ctx, q),
            Message::Ping { nonce, from } => {
                self.add_peer(from, peer_addr, now);
                self.send(ctx, env.src, &Message::Pong { nonce, from: self.id });
            }
            Message::Pong { nonce, from } => {
                if let Some((peer, _)) = self.outstanding.remove(&nonce) {
                    if peer == from {
                        self.ping_failures.insert(peer, 0);
                        if let Ok(i) = self.peers.binary_search_by_key(&peer, |p| p.id) {
                            self.peers[i].last_seen = now;
                        }
                    }
                }
            }
            Message::PeerExchange { from, reply, peers } => {
                self.add_peer(from, peer_addr, now);
                for rec in &peers {
                    self.merge_gossip(rec, now);
                }
                if !reply {
                    let msg = Message::PeerExchange {
                        from: self.id,
                        reply: true,
                        peers: self.peer_records(),
                    };
                    self.send(ctx, env.src, &msg);
                }
            }
            Message::Answer(_) | Message::AdvertiseAck { .. } => {}
        }
    }
}

impl Node for SuperNode {
    type Timer = OverlayTimer;

    fn on_message(&mut self, ctx: &mut Context<OverlayTimer>, env: Envelope) {
        self.handle(ctx, env);
    }

    fn on_timer(&mut self, ctx: &mut Context<OverlayTimer>, timer: OverlayTimer) {
        match timer {
            OverlayTimer::Tick => self.maintenance_tick(ctx),
            OverlayTimer::PingTimeout { round } => self.resolve_pings(round, ctx.now()),
            _ => {}
        }
    }
}
