//! Real-UDP drivers for a single grid host.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;
use std::time::{Duration, Instant};

use mmgp_core::grid::{GridConfig, GridHost};
use mmgp_core::net::Endpoint;
use mmgp_core::overlay::{
    Advertisement, EdgeEvent, NodeId, OverlayError, QueryOutcome, EDGE_PORT, SUPER_PORT,
};
use mmgp_core::transfer::TransferEvent;
use mmgp_core::udp::UdpRunner;

use crate::args::Peer;
use crate::error::CliError;

/// Rejects repeated super-node ids, including the local node's own.
pub fn check_peers(own: &str, peers: &[Peer]) -> Result<(), CliError> {
    let mut seen = BTreeSet::from([NodeId::from_name(own)]);
    for p in peers {
        if !seen.insert(NodeId::from_name(&p.name)) {
            return Err(CliError::Config(format!("duplicate super-node id {:?}", p.name)));
        }
    }
    Ok(())
}

pub struct Live {
    pub runner: UdpRunner<GridHost>,
}

impl Live {
    pub fn new(
        name: &str,
        bind: Ipv4Addr,
        super_node: bool,
        peers: &[Peer],
        cfg: &GridConfig,
    ) -> Result<Self, CliError> {
        check_peers(name, peers)?;
        let supers = peers.iter().map(|p| p.addr).collect();
        let host = GridHost::new(
            name,
            bind,
            super_node,
            supers,
            cfg.overlay.clone(),
            cfg.transfer.clone(),
            &cfg.key,
        );
        let mut runner = UdpRunner::new(bind, host);
        runner.bind(EDGE_PORT)?;
        if super_node {
            runner.bind(SUPER_PORT)?;
            let now = runner.now();
            let host = runner.node_mut();
            if let Some(s) = host.overlay.super_node.as_mut() {
                for p in peers {
                    s.add_peer(NodeId::from_name(&p.name), p.addr, now);
                }
            }
            runner.with_node(|h, ctx| {
                h.with_overlay(ctx, |o, c| {
                    if let Some(s) = o.super_node.as_mut() {
                        s.start(c);
                    }
                })
            })?;
        }
        Ok(Self { runner })
    }

    pub fn query(&mut self, service: &str) -> Result<Advertisement, CliError> {
        let id = self
            .runner
            .with_node(|h, ctx| h.with_overlay(ctx, |o, c| o.edge.query(c, service)))?
            .map_err(mmgp_core::grid::GridError::from)?;
        let find = |h: &GridHost| {
            h.overlay.edge.events().iter().find_map(|e| match e {
                EdgeEvent::QueryResolved { query_id, outcome, .. } if *query_id == id => Some(outcome.clone()),
                _ => None,
            })
        };
        self.runner.run_until(None, |h| find(h).is_some())?;
        match find(self.runner.node()) {
            Some(QueryOutcome::Found(ad)) => Ok(ad),
            Some(QueryOutcome::NotFound) => Err(grid(OverlayError::NotFound(service.to_string()))),
            _ => Err(grid(OverlayError::QueryTimeout(service.to_string()))),
        }
    }

    /// Connects to the advertised endpoints in order and receives one
    /// stream.
    pub fn fetch(&mut self, ad: &Advertisement, timeout: Duration) -> Result<(Endpoint, Vec<u8>, Duration), CliError> {
        let mut attempts = Vec::new();
        for &ep in &ad.endpoints {
            let sid = self
                .runner
                .with_node(|h, ctx| h.with_transfer(ctx, |t, c| t.connect(c, ep)))?;
            let started = Instant::now();
            let event = |h: &GridHost| {
                h.transfer.events().iter().rev().find(|e| session_of(e) == Some(sid)).cloned()
            };
            self.runner.run_until(Some(timeout), |h| {
                !matches!(event(h), None | Some(TransferEvent::Accepted { .. }) | Some(TransferEvent::Connected { .. }))
            })?;
            let result = match event(self.runner.node()) {
                Some(TransferEvent::ReceiveComplete { .. }) => {
                    let data = self.runner.node_mut().transfer.take_received(sid).unwrap_or_default();
                    Ok((ep, data, started.elapsed()))
                }
                Some(TransferEvent::ConnectFailed { error, .. }) => Err(error),
                Some(TransferEvent::Aborted { error, .. }) => {
                    self.runner.node_mut().transfer.close(sid);
                    return Err(grid(error));
                }
                _ => {
                    self.runner.node_mut().transfer.close(sid);
                    return Err(CliError::Timeout(format!("transfer from {ep}")));
                }
            };
            self.runner.node_mut().transfer.close(sid);
            match result {
                Ok(r) => return Ok(r),
                Err(e @ mmgp_core::transfer::TransferError::AuthFailed(_)) => return Err(grid(e)),
                Err(e) => attempts.push((ep, e.to_string())),
            }
        }
        Err(grid(OverlayError::ConnectFailed { attempts }))
    }
}

fn grid(e: impl Into<mmgp_core::grid::GridError>) -> CliError {
    CliError::Grid(e.into())
}

pub fn session_of(e: &TransferEvent) -> Option<u32> {
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

