use std::collections::{BTreeMap, BTreeSet};
use std::net::{Ipv4Addr, SocketAddrV4};

use crate::net::{Context, Endpoint, Envelope, Node, SimTime};

use super::wire::Message;
use super::{
    Advertisement, BindingAnswer, BindingQuery, NodeId, OverlayConfig, OverlayError, OverlayTimer,
    Result, EDGE_PORT, FIRST_PIPE_PORT,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryOutcome {
    Found(Advertisement),
    NotFound,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EdgeEvent {
    Published { service: String, request_id: u64 },
    PublishFailed { service: String, request_id: u64, error: OverlayError },
    QueryResolved { query_id: u64, service: String, outcome: QueryOutcome },
    /// This node answered a query as the advertiser.
    AnsweredQuery { query_id: u64, service: String, found: bool },
}

#[derive(Debug)]
struct PendingPublish {
    service: String,
    attempts: u32,
}

#[derive(Debug)]
pub struct EdgeNode {
    id: NodeId,
    ip: Ipv4Addr,
    config: OverlayConfig,
    supers: Vec<Endpoint>,
    pipes: BTreeMap<String, Vec<Endpoint>>,
    next_port: u16,
    published: BTreeSet<String>,
    refresh_scheduled: BTreeSet<String>,
    pending_publish: BTreeMap<u64, PendingPublish>,
    next_request: u64,
    pending_queries: BTreeMap<u64, String>,
    next_query: u64,
    suppressed_answers: u64,
    events: Vec<EdgeEvent>,
}

impl EdgeNode {
    pub fn new(id: NodeId, ip: Ipv4Addr, supers: Vec<Endpoint>, config: OverlayConfig) -> Self {
        Self {
            id,
            ip,
            config,
            supers,
            pipes: BTreeMap::new(),
            next_port: FIRST_PIPE_PORT,
            published: BTreeSet::new(),
            refresh_scheduled: BTreeSet::new(),
            pending_publish: BTreeMap::new(),
            next_request: 1,
            pending_queries: BTreeMap::new(),
            next_query: 1,
            suppressed_answers: 0,
            events: Vec::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn control_endpoint(&self) -> Endpoint {
        SocketAddrV4::new(self.ip, EDGE_PORT)
    }

    pub fn supers(&self) -> &[Endpoint] {
        &self.supers
    }

    pub fn set_supers(&mut self, supers: Vec<Endpoint>) {
        self.supers = supers;
    }

    /// Allocates a listening endpoint for `service`.
    pub fn create_input_pipe(&mut self, service: &str) -> Result<Endpoint> {
        if service.is_empty() {
            return Err(OverlayError::InvalidInput("empty service name".into()));
        }
        if self.pipes.contains_key(service) {
            return Err(OverlayError::AlreadyExists(service.to_string()));
        }
        let ep = SocketAddrV4::new(self.ip, self.next_port);
        self.next_port += 1;
        self.pipes.insert(service.to_string(), vec![ep]);
        Ok(ep)
    }

    /// Lists an extra out-port for an existing pipe, after the ones already
    /// advertised.
    pub fn add_endpoint(&mut self, service: &str, ep: Endpoint) -> Result<()> {
        let eps = self
            .pipes
            .get_mut(service)
            .ok_or_else(|| OverlayError::NotFound(service.to_string()))?;
        if !eps.contains(&ep) {
            eps.push(ep);
        }
        Ok(())
    }

    pub fn pipe(&self, service: &str) -> Option<&[Endpoint]> {
        self.pipes.get(service).map(Vec::as_slice)
    }

    /// Service owning the pipe that listens on `ep`.
    pub fn service_at(&self, ep: Endpoint) -> Option<&str> {
        self.pipes
            .iter()
            .find(|(_, eps)| eps.contains(&ep))
            .map(|(s, _)| s.as_str())
    }

    /// Ports of every local pipe.
    pub fn pipe_ports(&self) -> Vec<u16> {
        self.pipes.values().flatten().map(|ep| ep.port()).collect()
    }

    pub fn serves(&self, service: &str) -> bool {
        self.pipes.contains_key(service)
    }

    pub fn withdraw(&mut self, service: &str) -> bool {
        self.published.remove(service);
        self.pipes.remove(service).is_some()
    }

    pub fn advertisement(&self, service: &str, now: SimTime) -> Result<Advertisement> {
        let eps = self
            .pipes
            .get(service)
            .ok_or_else(|| OverlayError::NotFound(service.to_string()))?;
        Advertisement::new(self.id, service.to_string(), eps.clone(), now, self.config.ad_ttl)
    }

    fn send(&self, ctx: &mut Context<OverlayTimer>, to: Endpoint, msg: &Message) {
        ctx.send(EDGE_PORT, to, msg.kind(), msg.encode());
    }

    /// Starts publishing `service`; the outcome arrives later as an
    /// [`EdgeEvent`].
    pub fn publish(&mut self, ctx: &mut Context<OverlayTimer>, service: &str) -> Result<u64> {
        let ad = self.advertisement(service, ctx.now())?;
        if self.supers.is_empty() {
            return Err(OverlayError::DiscoveryTimeout {
                service: service.to_string(),
                attempts: 0,
            });
        }
        let request_id = self.next_request;
        self.next_request += 1;
        self.pending_publish.insert(
            request_id,
            PendingPublish {
                service: service.to_string(),
                attempts: 1,
            },
        );
        self.send(ctx, self.supers[0], &Message::Advertise { request_id, ad });
        ctx.set_timer(self.config.publish_timeout, OverlayTimer::PublishTimeout { request_id });
        Ok(request_id)
    }

    fn on_publish_timeout(&mut self, ctx: &mut Context<OverlayTimer>, request_id: u64) {
        let Some(p) = self.pending_publish.get_mut(&request_id) else {
            return;
        };
        if p.attempts > self.config.publish_retries || !self.pipes.contains_key(&p.service) {
            let p = self.pending_publish.remove(&request_id).expect("present");
            let error = OverlayError::DiscoveryTimeout {
                service: p.service.clone(),
                attempts: p.attempts,
            };
            self.events.push(EdgeEvent::PublishFailed {
                service: p.service,
                request_id,
                error,
            });
            return;
        }
        let target = self.supers[p.attempts as usize % self.supers.len()];
        p.attempts += 1;
        let service = p.service.clone();
        if let Ok(ad) = self.advertisement(&service, ctx.now()) {
            self.send(ctx, target, &Message::Advertise { request_id, ad });
        }
        ctx.set_timer(self.config.publish_timeout, OverlayTimer::PublishTimeout { request_id });
    }

    pub fn query(&mut self, ctx: &mut Context<OverlayTimer>, service: &str) -> Result<u64> {
        if service.is_empty() {
            return Err(OverlayError::InvalidInput("empty service name".into()));
        }
        let Some(&to) = self.supers.first() else {
            return Err(OverlayError::QueryTimeout(service.to_string()));
        };
        let query_id = ((self.id.get() as u64) << 24) ^ self.next_query;
        self.next_query += 1;
        self.pending_queries.insert(query_id, service.to_string());
        let q = BindingQuery {
            query_id,
            requester: self.id,
            service_name: service.to_string(),
            reply_endpoint: self.control_endpoint(),
            hop_count: 0,
            visited: Vec::new(),
        };
        self.send(ctx, to, &Message::Query(q));
        ctx.set_timer(self.config.query_timeout, OverlayTimer::QueryTimeout { query_id });
        Ok(query_id)
    }

    pub fn answer_query(&mut self, ctx: &mut Context<OverlayTimer>, query: BindingQuery) {
        let advertisement = self.advertisement(&query.service_name, ctx.now()).ok();
        self.events.push(EdgeEvent::AnsweredQuery {
            query_id: query.query_id,
            service: query.service_name.clone(),
            found: advertisement.is_some(),
        });
        let answer = BindingAnswer {
            query_id: query.query_id,
            advertisement,
        };
        self.send(ctx, query.reply_endpoint, &Message::Answer(answer));
    }

    pub fn pending_query_count(&self) -> usize {
        self.pending_queries.len()
    }

    /// Answers that arrived for queries already resolved.
    pub fn suppressed_answers(&self) -> u64 {
        self.suppressed_answers
    }

    pub fn events(&self) -> &[EdgeEvent] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<EdgeEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn handle(&mut self, ctx: &mut Context<OverlayTimer>, env: Envelope) {
        let Ok(msg) = Message::decode(&env.payload) else {
            return;
        };
        match msg {
            Message::AdvertiseAck { request_id } => {
                let Some(p) = self.pending_publish.remove(&request_id) else {
                    return;
                };
                self.published.insert(p.service.clone());
                if self.config.auto_republish && self.refresh_scheduled.insert(p.service.clone()) {
                    let half = SimTime(self.config.ad_ttl.as_micros() / 2);
                    ctx.set_timer(half, OverlayTimer::Republish { service: p.service.clone() });
                }
                self.events.push(EdgeEvent::Published {
                    service: p.service,
                    request_id,
                });
            }
            Message::Answer(a) => match self.pending_queries.remove(&a.query_id) {
                Some(service) => {
                    let outcome = match a.advertisement {
                        Some(ad) => QueryOutcome::Found(ad),
                        None => QueryOutcome::NotFound,
                    };
                    self.events.push(EdgeEvent::QueryResolved {
                        query_id: a.query_id,
                        service,
                        outcome,
                    });
                }
                None => self.suppressed_answers += 1,
            },
            Message::Query(q) => self.answer_query(ctx, q),
            _ => {}
        }
    }

    pub fn on_timer(&mut self, ctx: &mut Context<OverlayTimer>, timer: OverlayTimer) {
        match timer {
            OverlayTimer::PublishTimeout { request_id } => self.on_publish_timeout(ctx, request_id),
            OverlayTimer::QueryTimeout { query_id } => {
                if let Some(service) = self.pending_queries.remove(&query_id) {
                    self.events.push(EdgeEvent::QueryResolved {
                        query_id,
                        service,
                        outcome: QueryOutcome::TimedOut,
                    });
                }
            }
            OverlayTimer::Republish { service } => {
                self.refresh_scheduled.remove(&service);
                if self.published.contains(&service) {
                    let _ = self.publish(ctx, &service);
                }
            }
            _ => {}
        }
    }
}

impl Node for EdgeNode {
    type Timer = OverlayTimer;

    fn on_message(&mut self, ctx: &mut Context<OverlayTimer>, env: Envelope) {
        self.handle(ctx, env);
    }

    fn on_timer(&mut self, ctx: &mut Context<OverlayTimer>, timer: OverlayTimer) {
        EdgeNode::on_timer(self, ctx, timer);
    }
}
