//! Deterministic in-process network driven by a virtual clock.
//!
//! Nodes are [`Node`] state machines keyed by IPv4 address. Links are
//! undirected, carry an independent seeded RNG stream each and model loss,
//! latency, bandwidth serialization and partitions. Every injected datagram
//! is eventually counted exactly once as delivered or dropped.

mod scenario;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::net::Ipv4Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::net::{Context, Envelope, Node, SimTime};

pub use scenario::{Action, Scenario, ScenarioLink, ScenarioNode, ScheduledAction};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("unknown node {0}")]
    UnknownNode(Ipv4Addr),
    #[error("node {0} already exists")]
    DuplicateNode(Ipv4Addr),
    #[error("invalid link: {0}")]
    InvalidLink(String),
    #[error("scenario line {line}: {message}")]
    Scenario { line: usize, message: String },
    #[error("cannot read scenario: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Latency {
    Fixed(SimTime),
    /// Uniform over the inclusive range, in whole microseconds.
    Uniform(SimTime, SimTime),
}

/// Drop the `ordinal`-th (1-based) injection on a link, optionally counting
/// only datagrams of one kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScriptedDrop {
    pub kind: Option<&'static str>,
    pub ordinal: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLink {
    pub latency: Latency,
    pub loss_probability: f64,
    /// Bytes per virtual second, 0 for unlimited.
    pub bandwidth_cap: u64,
    pub seed: u64,
    pub scripted_drops: BTreeSet<ScriptedDrop>,
}

impl Default for SimLink {
    fn default() -> Self {
        Self::new(Latency::Fixed(SimTime::from_millis(1)))
    }
}

impl SimLink {
    pub fn new(latency: Latency) -> Self {
        Self {
            latency,
            loss_probability: 0.0,
            bandwidth_cap: 0,
            seed: 0,
            scripted_drops: BTreeSet::new(),
        }
    }

    pub fn fixed_ms(ms: u64) -> Self {
        Self::new(Latency::Fixed(SimTime::from_millis(ms)))
    }

    pub fn with_loss(mut self, p: f64) -> Self {
        self.loss_probability = p;
        self
    }

    pub fn with_bandwidth(mut self, bytes_per_sec: u64) -> Self {
        self.bandwidth_cap = bytes_per_sec;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_scripted_drop(mut self, kind: Option<&'static str>, ordinal: u64) -> Self {
        self.scripted_drops.insert(ScriptedDrop { kind, ordinal });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.loss_probability) {
            return Err(SimError::InvalidLink(format!(
                "loss probability {} outside [0, 1]",
                self.loss_probability
            )));
        }
        if let Latency::Uniform(lo, hi) = self.latency {
            if lo > hi {
                return Err(SimError::InvalidLink(format!("latency range {lo}..{hi} is empty")));
            }
        }
        Ok(())
    }
}

/// RNG stream for the link between `a` and `b`; independent of every other
/// link even when seeds coincide.
pub fn link_rng(seed: u64, a: Ipv4Addr, b: Ipv4Addr) -> ChaCha8Rng {
    let (lo, hi) = ordered(a, b);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(u32::from(lo)) << 32) | u64::from(u32::from(hi)));
    rng
}

fn ordered(a: Ipv4Addr, b: Ipv4Addr) -> (Ipv4Addr, Ipv4Addr) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug)]
struct LinkState {
    config: SimLink,
    rng: ChaCha8Rng,
    partitioned: bool,
    epoch: u64,
    busy_until: [SimTime; 2],
    injections: u64,
    kind_injections: BTreeMap<&'static str, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    Loss,
    Scripted,
    Partition,
    /// In flight when the link was partitioned.
    InFlight,
    NoLink,
    NodeDown,
    NoNode,
}

impl DropReason {
    pub fn label(self) -> &'static str {
        match self {
            DropReason::Loss => "drop-loss",
            DropReason::Scripted => "drop-scripted",
            DropReason::Partition => "drop-partition",
            DropReason::InFlight => "drop-inflight",
            DropReason::NoLink => "drop-nolink",
            DropReason::NodeDown => "drop-down",
            DropReason::NoNode => "drop-nonode",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectOutcome {
    Scheduled(SimTime),
    Dropped(DropReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub event: &'static str,
    pub src: String,
    pub dst: String,
    pub kind: &'static str,
    pub size: usize,
}

pub const TRACE_HEADER: &str = "time,event,src,dst,kind,size";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KindStats {
    pub injected: u64,
    pub injected_bytes: u64,
    pub delivered: u64,
    pub delivered_bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimStats {
    pub injected: u64,
    pub delivered: u64,
    pub dropped: BTreeMap<DropReason, u64>,
    pub by_kind: BTreeMap<&'static str, KindStats>,
}

impl SimStats {
    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }

    pub fn kind(&self, kind: &str) -> KindStats {
        self.by_kind.get(kind).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub at: SimTime,
    pub envelope: Envelope,
}

#[derive(Debug)]
enum Event<T> {
    Deliver {
        env: Envelope,
        link: Option<(Ipv4Addr, Ipv4Addr)>,
        epoch: u64,
    },
    Timer {
        ip: Ipv4Addr,
        timer: T,
    },
}

struct Slot<N: Node> {
    node: N,
    down: bool,
    frozen: Vec<N::Timer>,
}

pub struct Simulator<N: Node> {
    now: SimTime,
    seq: u64,
    nodes: BTreeMap<Ipv4Addr, Slot<N>>,
    links: BTreeMap<(Ipv4Addr, Ipv4Addr), LinkState>,
    queue: BTreeMap<(SimTime, u64), Event<N::Timer>>,
    stats: SimStats,
    tracing: bool,
    trace: Vec<TraceRecord>,
}

impl<N: Node> Default for Simulator<N> {
    fn default() -> Self {
        Self::new()
    }
}

impl<N: Node> Simulator<N> {
    pub fn new() -> Self {
        Self {
            now: SimTime::ZERO,
            seq: 0,
            nodes: BTreeMap::new(),
            links: BTreeMap::new(),
            queue: BTreeMap::new(),
            stats: SimStats::default(),
            tracing: true,
            trace: Vec::new(),
        }
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.tracing = on;
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn add_node(&mut self, ip: Ipv4Addr, node: N) -> Result<()> {
        if self.nodes.contains_key(&ip) {
            return Err(SimError::DuplicateNode(ip));
        }
        self.nodes.insert(
            ip,
            Slot {
                node,
                down: false,
                frozen: Vec::new(),
            },
        );
        Ok(())
    }

    /// Adds or replaces the link between `a` and `b`.
    pub fn add_link(&mut self, a: Ipv4Addr, b: Ipv4Addr, link: SimLink) -> Result<()> {
        link.validate()?;
        if a == b {
            return Err(SimError::InvalidLink(format!("self-link on {a}")));
        }
        for ip in [a, b] {
            if !self.nodes.contains_key(&ip) {
                return Err(SimError::UnknownNode(ip));
            }
        }
        let rng = link_rng(link.seed, a, b);
        self.links.insert(
            ordered(a, b),
            LinkState {
                config: link,
                rng,
                partitioned: false,
                epoch: 0,
                busy_until: [SimTime::ZERO; 2],
                injections: 0,
                kind_injections: BTreeMap::new(),
            },
        );
        Ok(())
    }

    pub fn link(&self, a: Ipv4Addr, b: Ipv4Addr) -> Option<&SimLink> {
        self.links.get(&ordered(a, b)).map(|l| &l.config)
    }

    pub fn has_link(&self, a: Ipv4Addr, b: Ipv4Addr) -> bool {
        self.links.contains_key(&ordered(a, b))
    }

    pub fn node(&self, ip: Ipv4Addr) -> Option<&N> {
        self.nodes.get(&ip).map(|s| &s.node)
    }

    pub fn node_mut(&mut self, ip: Ipv4Addr) -> Option<&mut N> {
        self.nodes.get_mut(&ip).map(|s| &mut s.node)
    }

    pub fn node_addrs(&self) -> Vec<Ipv4Addr> {
        self.nodes.keys().copied().collect()
    }

    pub fn is_down(&self, ip: Ipv4Addr) -> bool {
        self.nodes.get(&ip).is_some_and(|s| s.down)
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn in_flight(&self) -> u64 {
        self.queue
            .values()
            .filter(|e| matches!(e, Event::Deliver { .. }))
            .count() as u64
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.trace.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.trace {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.time.as_micros(),
                r.event,
                r.src,
                r.dst,
                r.kind,
                r.size
            );
        }
        out
    }

    /// Runs `f` against a node as if it were handling an event now, then
    /// applies the sends and timers it requested.
    pub fn with_node<R>(
        &mut self,
        ip: Ipv4Addr,
        f: impl FnOnce(&mut N, &mut Context<N::Timer>) -> R,
    ) -> Result<R> {
        let slot = self.nodes.get_mut(&ip).ok_or(SimError::UnknownNode(ip))?;
        let mut ctx = Context::new(self.now, ip);
        let out = f(&mut slot.node, &mut ctx);
        self.apply(ip, ctx);
        Ok(out)
    }

    pub fn schedule_timer(&mut self, ip: Ipv4Addr, delay: SimTime, timer: N::Timer) {
        let at = self.now + delay;
        self.push(at, Event::Timer { ip, timer });
    }

    fn push(&mut self, at: SimTime, event: Event<N::Timer>) {
        self.queue.insert((at, self.seq), event);
        self.seq += 1;
    }

    fn record(&mut self, event: &'static str, env: &Envelope) {
        if self.tracing {
            self.trace.push(TraceRecord {
                time: self.now,
                event,
                src: env.src.to_string(),
                dst: env.dst.to_string(),
                kind: env.kind,
                size: env.size(),
            });
        }
    }

    fn drop_env(&mut self, env: &Envelope, reason: DropReason) {
        *self.stats.dropped.entry(reason).or_default() += 1;
        self.record(reason.label(), env);
    }

    fn apply(&mut self, ip: Ipv4Addr, ctx: Context<N::Timer>) {
        let (outbox, timers) = ctx.into_parts();
        for env in outbox {
            self.inject(env);
        }
        for (delay, timer) in timers {
            self.schedule_timer(ip, delay, timer);
        }
    }

    /// Puts a datagram on the wire at the current time.
    pub fn inject(&mut self, env: Envelope) -> InjectOutcome {
        self.stats.injected += 1;
        let ks = self.stats.by_kind.entry(env.kind).or_default();
        ks.injected += 1;
        ks.injected_bytes += env.size() as u64;
        self.record("send", &env);

        let (src, dst) = (*env.src.ip(), *env.dst.ip());
        if self.is_down(src) {
            self.drop_env(&env, DropReason::NodeDown);
            return InjectOutcome::Dropped(DropReason::NodeDown);
        }
        if src == dst {
            let at = self.now;
            self.push(at, Event::Deliver { env, link: None, epoch: 0 });
            return InjectOutcome::Scheduled(at);
        }
        let key = ordered(src, dst);
        let Some(link) = self.links.get_mut(&key) else {
            self.drop_env(&env, DropReason::NoLink);
            return InjectOutcome::Dropped(DropReason::NoLink);
        };

        link.injections += 1;
        let kind_count = {
            let c = link.kind_injections.entry(env.kind).or_default();
            *c += 1;
            *c
        };
        let draw: f64 = link.rng.gen();
        let latency = match link.config.latency {
            Latency::Fixed(t) => t,
            Latency::Uniform(lo, hi) => SimTime(link.rng.gen_range(lo.0..=hi.0)),
        };
        let scripted = link.config.scripted_drops.iter().any(|d| match d.kind {
            None => d.ordinal == link.injections,
            Some(k) => k == env.kind && d.ordinal == kind_count,
        });
        let reason = if link.partitioned {
            Some(DropReason::Partition)
        } else if scripted {
            Some(DropReason::Scripted)
        } else if draw < link.config.loss_probability {
            Some(DropReason::Loss)
        } else {
            None
        };
        if let Some(reason) = reason {
            self.drop_env(&env, reason);
            return InjectOutcome::Dropped(reason);
        }

        let dir = usize::from(src > dst);
        let start = link.busy_until[dir].max(self.now);
        let serialization = match link.config.bandwidth_cap {
            0 => SimTime::ZERO,
            bw => SimTime((env.size() as u64 * 1_000_000).div_ceil(bw)),
        };
        link.busy_until[dir] = start + serialization;
        let at = start + serialization + latency;
        let epoch = link.epoch;
        self.push(at, Event::Deliver { env, link: Some(key), epoch });
        InjectOutcome::Scheduled(at)
    }

    pub fn partition(&mut self, a: Ipv4Addr, b: Ipv4Addr) {
        if let Some(l) = self.links.get_mut(&ordered(a, b)) {
            if !l.partitioned {
                l.partitioned = true;
                l.epoch += 1;
            }
        }
    }

    pub fn heal(&mut self, a: Ipv4Addr, b: Ipv4Addr) {
        if let Some(l) = self.links.get_mut(&ordered(a, b)) {
            l.partitioned = false;
        }
    }

    pub fn is_partitioned(&self, a: Ipv4Addr, b: Ipv4Addr) -> bool {
        self.links.get(&ordered(a, b)).is_some_and(|l| l.partitioned)
    }

    /// A down node drops everything it would send or receive; its timers
    /// are held and re-armed when it comes back up.
    pub fn set_node_down(&mut self, ip: Ipv4Addr, down: bool) -> Result<()> {
        let slot = self.nodes.get_mut(&ip).ok_or(SimError::UnknownNode(ip))?;
        slot.down = down;
        if !down {
            let frozen = std::mem::take(&mut slot.frozen);
            for timer in frozen {
                self.schedule_timer(ip, SimTime::ZERO, timer);
            }
        }
        Ok(())
    }

    pub fn next_event_time(&self) -> Option<SimTime> {
        self.queue.keys().next().map(|k| k.0)
    }

    /// Processes the earliest pending event, returning the delivery if it
    /// was one.
    pub fn step(&mut self) -> Option<Option<Delivery>> {
        let ((at, _), event) = self.queue.pop_first()?;
        self.now = self.now.max(at);
        Some(self.dispatch(event))
    }

    fn dispatch(&mut self, event: Event<N::Timer>) -> Option<Delivery> {
        match event {
            Event::Timer { ip, timer } => {
                let now = self.now;
                let slot = self.nodes.get_mut(&ip)?;
                if slot.down {
                    slot.frozen.push(timer);
                    return None;
                }
                let mut ctx = Context::new(now, ip);
                slot.node.on_timer(&mut ctx, timer);
                self.apply(ip, ctx);
                None
            }
            Event::Deliver { env, link, epoch } => {
                if let Some(key) = link {
                    let stale = self
                        .links
                        .get(&key)
                        .is_none_or(|l| l.partitioned || l.epoch != epoch);
                    if stale {
                        self.drop_env(&env, DropReason::InFlight);
                        return None;
                    }
                }
                let ip = *env.dst.ip();
                let reason = match self.nodes.get(&ip) {
                    None => Some(DropReason::NoNode),
                    Some(s) if s.down => Some(DropReason::NodeDown),
                    Some(_) => None,
                };
                if let Some(reason) = reason {
                    self.drop_env(&env, reason);
                    return None;
                }
                self.stats.delivered += 1;
                let ks = self.stats.by_kind.entry(env.kind).or_default();
                ks.delivered += 1;
                ks.delivered_bytes += env.size() as u64;
                self.record("deliver", &env);
                let now = self.now;
                let slot = self.nodes.get_mut(&ip).expect("checked above");
                let mut ctx = Context::new(now, ip);
                slot.node.on_message(&mut ctx, env.clone());
                self.apply(ip, ctx);
                Some(Delivery { at: now, envelope: env })
            }
        }
    }

    /// Processes every event due at or before `until`, then sets the clock
    /// to `until`.
    pub fn advance(&mut self, until: SimTime) -> Vec<Delivery> {
        let mut out = Vec::new();
        while self.next_event_time().is_some_and(|t| t <= until) {
            if let Some(Some(d)) = self.step() {
                out.push(d);
            }
        }
        self.now = self.now.max(until);
        out
    }

    /// Steps until `done` holds or the clock would pass `deadline`. Returns
    /// whether `done` was reached.
    pub fn run_until(&mut self, deadline: SimTime, mut done: impl FnMut(&Self) -> bool) -> bool {
        loop {
            if done(self) {
                return true;
            }
            match self.next_event_time() {
                Some(t) if t <= deadline => {
                    self.step();
                }
                _ => {
                    self.now = self.now.max(deadline);
                    return done(self);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::SocketAddrV4;

    #[derive(Default)]
    struct Sink {
        got: Vec<(SimTime, Vec<u8>)>,
        ticks: u32,
    }

    impl Node for Sink {
        type Timer = u32;
        fn on_message(&mut self, ctx: &mut Context<u32>, env: Envelope) {
            self.got.push((ctx.now(), env.payload));
        }
        fn on_timer(&mut self, ctx: &mut Context<u32>, t: u32) {
            self.ticks += 1;
            ctx.set_timer(SimTime::from_millis(10), t);
        }
    }

    fn ip(n: u8) -> Ipv4Addr {
        Ipv4Addr::new(10, 0, 0, n)
    }

    fn env(a: u8, b: u8, payload: Vec<u8>) -> Envelope {
        Envelope {
            src: SocketAddrV4::new(ip(a), 1),
            dst: SocketAddrV4::new(ip(b), 1),
            kind: "T",
            payload,
        }
    }

    fn pair(link: SimLink) -> Simulator<Sink> {
        let mut sim = Simulator::new();
        sim.add_node(ip(1), Sink::default()).unwrap();
        sim.add_node(ip(2), Sink::default()).unwrap();
        sim.add_link(ip(1), ip(2), link).unwrap();
        sim
    }

    #[test]
    fn loss_zero_always_schedules() {
        let mut sim = pair(SimLink::fixed_ms(1).with_seed(3));
        for _ in 0..200 {
            assert!(matches!(sim.inject(env(1, 2, vec![0])), InjectOutcome::Scheduled(_)));
        }
    }

    #[test]
    fn loss_one_always_drops() {
        let mut sim = pair(SimLink::fixed_ms(1).with_loss(1.0));
        for _ in 0..200 {
            assert_eq!(sim.inject(env(1, 2, vec![0])), InjectOutcome::Dropped(DropReason::Loss));
        }
    }

    #[test]
    fn drop_count_matches_rng_replay() {
        let mut sim = pair(SimLink::fixed_ms(1).with_loss(0.1).with_seed(7));
        let dropped = (0..1000)
            .filter(|_| matches!(sim.inject(env(1, 2, vec![0])), InjectOutcome::Dropped(_)))
            .count();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        rng.set_stream((u64::from(u32::from(ip(1))) << 32) | u64::from(u32::from(ip(2))));
        let expected = (0..1000).filter(|_| rng.gen::<f64>() < 0.1).count();
        assert_eq!(dropped, expected);
        assert!((60..140).contains(&dropped));
    }

    #[test]
    fn empty_advance_moves_clock() {
        let mut sim: Simulator<Sink> = Simulator::new();
        assert!(sim.advance(SimTime::from_millis(50)).is_empty());
        assert_eq!(sim.now(), SimTime::from_millis(50));
    }

    #[test]
    fn ties_delivered_in_injection_order() {
        let mut sim = pair(SimLink::fixed_ms(5));
        sim.inject(env(1, 2, vec![1]));
        sim.inject(env(1, 2, vec![2]));
        let d = sim.advance(SimTime::from_millis(5));
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].at, d[1].at);
        assert_eq!(d[0].envelope.payload, vec![1]);
        assert_eq!(d[1].envelope.payload, vec![2]);
    }

    #[test]
    fn never_delivered_before_latency() {
        let mut sim = pair(SimLink::new(Latency::Uniform(SimTime(2_000), SimTime(9_000))).with_seed(1));
        sim.advance(SimTime(1_000));
        for _ in 0..50 {
            sim.inject(env(1, 2, vec![0]));
        }
        let d = sim.advance(SimTime::from_secs(1));
        assert_eq!(d.len(), 50);
        assert!(d.iter().all(|d| d.at >= SimTime(3_000) && d.at <= SimTime(10_000)));
    }

    #[test]
    fn bandwidth_serializes_per_direction() {
        let mut sim = pair(SimLink::fixed_ms(1).with_bandwidth(1_000));
        assert_eq!(sim.inject(env(1, 2, vec![0; 100])), InjectOutcome::Scheduled(SimTime(101_000)));
        assert_eq!(sim.inject(env(1, 2, vec![0; 100])), InjectOutcome::Scheduled(SimTime(201_000)));
        assert_eq!(sim.inject(env(2, 1, vec![0; 100])), InjectOutcome::Scheduled(SimTime(101_000)));
    }

    #[test]
    fn partition_drops_in_flight_and_heal_restores() {
        let mut sim = pair(SimLink::fixed_ms(5));
        sim.inject(env(1, 2, vec![1]));
        sim.partition(ip(1), ip(2));
        assert_eq!(sim.inject(env(1, 2, vec![2])), InjectOutcome::Dropped(DropReason::Partition));
        assert!(sim.advance(SimTime::from_millis(10)).is_empty());
        assert_eq!(sim.stats().dropped[&DropReason::InFlight], 1);
        sim.heal(ip(1), ip(2));
        sim.heal(ip(1), ip(2));
        sim.inject(env(1, 2, vec![3]));
        assert_eq!(sim.advance(SimTime::from_millis(20)).len(), 1);
    }

    #[test]
    fn conservation_holds() {
        let mut sim = pair(SimLink::fixed_ms(3).with_loss(0.3).with_seed(11));
        for i in 0..300u32 {
            sim.inject(env(1, 2, i.to_le_bytes().to_vec()));
            if i == 150 {
                sim.partition(ip(1), ip(2));
            }
            if i == 170 {
                sim.heal(ip(1), ip(2));
            }
            sim.advance(sim.now() + SimTime(500));
        }
        let s = sim.stats();
        assert_eq!(s.injected, s.delivered + s.dropped_total() + sim.in_flight());
        sim.advance(SimTime::from_secs(1));
        let s = sim.stats();
        assert_eq!(s.injected, s.delivered + s.dropped_total());
    }

    #[test]
    fn missing_link_drops() {
        let mut sim: Simulator<Sink> = Simulator::new();
        sim.add_node(ip(1), Sink::default()).unwrap();
        sim.add_node(ip(3), Sink::default()).unwrap();
        assert_eq!(sim.inject(env(1, 3, vec![])), InjectOutcome::Dropped(DropReason::NoLink));
        assert!(sim.add_node(ip(1), Sink::default()).is_err());
        assert!(sim.add_link(ip(1), ip(9), SimLink::default()).is_err());
        assert!(sim.add_link(ip(1), ip(3), SimLink::default().with_loss(1.5)).is_err());
    }

    #[test]
    fn scripted_drop_hits_exact_ordinal() {
        let mut sim = pair(SimLink::fixed_ms(1).with_scripted_drop(None, 2).with_scripted_drop(Some("X"), 1));
        assert!(matches!(sim.inject(env(1, 2, vec![1])), InjectOutcome::Scheduled(_)));
        assert_eq!(sim.inject(env(1, 2, vec![2])), InjectOutcome::Dropped(DropReason::Scripted));
        let mut x = env(2, 1, vec![3]);
        x.kind = "X";
        assert_eq!(sim.inject(x.clone()), InjectOutcome::Dropped(DropReason::Scripted));
        assert!(matches!(sim.inject(x), InjectOutcome::Scheduled(_)));
    }

    #[test]
    fn down_node_timers_resume() {
        let mut sim = pair(SimLink::fixed_ms(1));
        sim.schedule_timer(ip(1), SimTime::ZERO, 0);
        sim.advance(SimTime::from_millis(25));
        assert_eq!(sim.node(ip(1)).unwrap().ticks, 3);
        sim.set_node_down(ip(1), true).unwrap();
        sim.inject(env(2, 1, vec![]));
        sim.advance(SimTime::from_millis(100));
        assert_eq!(sim.node(ip(1)).unwrap().ticks, 3);
        assert!(sim.node(ip(1)).unwrap().got.is_empty());
        sim.set_node_down(ip(1), false).unwrap();
        sim.advance(SimTime::from_millis(100));
        assert_eq!(sim.node(ip(1)).unwrap().ticks, 4);
    }

    #[test]
    fn trace_is_deterministic() {
        let run = || {
            let mut sim = pair(SimLink::new(Latency::Uniform(SimTime(100), SimTime(5_000))).with_loss(0.2).with_seed(42));
            for i in 0..100u8 {
                sim.inject(env(1 + i % 2, 2 - i % 2, vec![i; i as usize]));
                sim.advance(sim.now() + SimTime(700));
            }
            sim.advance(SimTime::from_secs(1));
            sim.trace_csv()
        };
        let a = run();
        assert!(a.starts_with(TRACE_HEADER));
        assert_eq!(a, run());
    }
}
