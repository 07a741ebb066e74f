//! A grid host combines the overlay roles and the transfer stack of one
//! machine. [`Grid`] drives a set of hosts over the simulator and exposes
//! the blocking discovery, connection and copy operations.

mod harness;

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::codec::{self, CodecError, VideoSequence};
use crate::net::{Context, Endpoint, Envelope, Node, SimTime};
use crate::overlay::{NodeId, OverlayConfig, OverlayError, OverlayHost, OverlayTimer};
use crate::simnet::SimError;
use crate::transfer::{TransferConfig, TransferError, TransferStack, TransferTimer};

pub use harness::{Connection, CopyOption, CopyRequest, Grid, GridConfig, TransferReport, HUB};

#[derive(Debug, Error)]
pub enum GridError {
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("nothing is served at {0}")]
    NotServed(Endpoint),
    #[error("timed out after {0}")]
    Timeout(SimTime),
}

pub type Result<T> = std::result::Result<T, GridError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HostTimer {
    Overlay(OverlayTimer),
    Transfer(TransferTimer),
}

/// Raw planes need their dimensions; PGM sequences carry their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

/// Interprets bytes as video: a PGM sequence when they start with `P5`,
/// otherwise headerless luma planes of the given size.
pub fn parse_video(bytes: &[u8], dims: Option<Dims>) -> codec::Result<VideoSequence> {
    if bytes.starts_with(b"P5") {
        return codec::io::from_pgm_sequence(bytes);
    }
    let d = dims.ok_or_else(|| {
        CodecError::InvalidInput("raw luma input needs --width and --height".into())
    })?;
    VideoSequence::from_planes(d.width, d.height, bytes)
}

#[derive(Debug)]
pub struct GridHost {
    pub name: String,
    pub overlay: OverlayHost,
    pub transfer: TransferStack,
    /// Content behind each published service.
    pub files: BTreeMap<String, Vec<u8>>,
}

impl GridHost {
    pub fn new(
        name: &str,
        ip: Ipv4Addr,
        super_node: bool,
        supers: Vec<Endpoint>,
        overlay: OverlayConfig,
        transfer: TransferConfig,
        key: &[u8],
    ) -> Self {
        let id = NodeId::from_name(name);
        let overlay = if super_node {
            OverlayHost::super_node(id, ip, overlay)
        } else {
            OverlayHost::edge(id, ip, supers, overlay)
        };
        Self {
            name: name.to_string(),
            overlay,
            transfer: TransferStack::new(ip, key, transfer),
            files: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.overlay.edge.id()
    }

    /// Runs an overlay operation with a child context.
    pub fn with_overlay<R>(
        &mut self,
        ctx: &mut Context<HostTimer>,
        f: impl FnOnce(&mut OverlayHost, &mut Context<OverlayTimer>) -> R,
    ) -> R {
        let mut sub = Context::new(ctx.now(), ctx.ip());
        let out = f(&mut self.overlay, &mut sub);
        sub.merge_into(ctx, HostTimer::Overlay);
        out
    }

    pub fn with_transfer<R>(
        &mut self,
        ctx: &mut Context<HostTimer>,
        f: impl FnOnce(&mut TransferStack, &mut Context<TransferTimer>) -> R,
    ) -> R {
        let mut sub = Context::new(ctx.now(), ctx.ip());
        let out = f(&mut self.transfer, &mut sub);
        sub.merge_into(ctx, HostTimer::Transfer);
        out
    }
}

impl Node for GridHost {
    type Timer = HostTimer;

    fn on_message(&mut self, ctx: &mut Context<HostTimer>, env: Envelope) {
        if OverlayHost::handles_port(env.dst.port()) {
            self.with_overlay(ctx, |o, c| o.on_message(c, env));
        } else {
            self.with_transfer(ctx, |t, c| t.handle(c, env));
        }
    }

    fn on_timer(&mut self, ctx: &mut Context<HostTimer>, timer: HostTimer) {
        match timer {
            HostTimer::Overlay(t) => self.with_overlay(ctx, |o, c| o.on_timer(c, t)),
            HostTimer::Transfer(t) => self.with_transfer(ctx, |s, c| s.on_timer(c, t)),
        }
    }
}
