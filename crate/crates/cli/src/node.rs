use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use mmgp_core::codec;
use mmgp_core::grid::{parse_video, Grid, GridConfig};
use mmgp_core::net::SimTime;
use mmgp_core::overlay::{Advertisement, EdgeEvent};
use mmgp_core::simnet::Scenario;
use mmgp_core::transfer::TransferEvent;

use crate::args::{CodecArgs, DimArgs, Peer, ScenarioArgs};
use crate::error::CliError;
use crate::live::Live;
use crate::util;

pub struct ServeOptions<'a> {
    pub name: &'a str,
    pub bind: Ipv4Addr,
    pub super_node: bool,
    pub peers: &'a [Peer],
    pub publish: &'a [(String, PathBuf)],
    pub compress: Option<(&'a CodecArgs, &'a DimArgs)>,
    pub duration: Option<Duration>,
}

pub fn serve(opts: ServeOptions<'_>, cfg: &GridConfig) -> Result<(), CliError> {
    let mut files = BTreeMap::new();
    for (service, path) in opts.publish {
        let mut bytes = util::read(path)?;
        if let Some((codec_args, dims)) = opts.compress {
            let video = parse_video(&bytes, dims.dims())?;
            bytes = codec::encode_to_bytes(&video, &codec_args.encoder()?)?;
        }
        files.insert(service.clone(), bytes);
    }
    if !opts.super_node && opts.peers.is_empty() {
        return Err(CliError::Config("an edge node needs at least one --peer".into()));
    }
    let mut live = Live::new(opts.name, opts.bind, opts.super_node, opts.peers, cfg)?;
    for (service, bytes) in files {
        let host = live.runner.node_mut();
        let ep = host.overlay.edge.create_input_pipe(&service).map_err(mmgp_core::grid::GridError::from)?;
        host.transfer.listen(ep.port());
        host.files.insert(service.clone(), bytes);
        live.runner.bind(ep.port())?;
        live.runner
            .with_node(|h, ctx| h.with_overlay(ctx, |o, c| o.edge.publish(c, &service)))?
            .map_err(mmgp_core::grid::GridError::from)?;
    }
    println!(
        "{} {} listening on {}",
        if opts.super_node { "super node" } else { "edge node" },
        opts.name,
        opts.bind
    );

    let deadline = opts.duration.map(|d| Instant::now() + d);
    let (mut edge_seen, mut transfer_seen) = (0, 0);
    while deadline.is_none_or(|d| Instant::now() < d) {
        if !live.runner.poll()? {
            std::thread::sleep(Duration::from_millis(1));
        }
        let edge_events = live.runner.node().overlay.edge.events()[edge_seen..].to_vec();
        edge_seen += edge_events.len();
        for e in edge_events {
            match e {
                EdgeEvent::Published { service, .. } => println!("published {service}"),
                EdgeEvent::PublishFailed { service, error, .. } => println!("publish {service} failed: {error}"),
                EdgeEvent::AnsweredQuery { service, found, .. } => {
                    println!("answered query for {service}: {}", if found { "found" } else { "not-found" })
                }
                EdgeEvent::QueryResolved { .. } => {}
            }
        }
        let transfer_events = live.runner.node().transfer.events()[transfer_seen..].to_vec();
        transfer_seen += transfer_events.len();
        for e in transfer_events {
            match e {
                TransferEvent::Accepted { session_id, peer, local_port } => {
                    let host = live.runner.node();
                    let ep = host.transfer.endpoint(local_port);
                    let data = host
                        .overlay
                        .edge
                        .service_at(ep)
                        .and_then(|s| host.files.get(s))
                        .cloned();
                    if let Some(data) = data {
                        println!("sending {} bytes to {peer}", data.len());
                        let sent = live
                            .runner
                            .with_node(|h, ctx| h.with_transfer(ctx, |t, c| t.send_stream(c, session_id, data)))?;
                        if let Err(e) = sent {
                            println!("session {session_id}: {e}");
                        }
                    }
                }
                TransferEvent::Refused { peer, .. } => println!("refused {peer}: bad credentials"),
                TransferEvent::SendComplete { session_id } => {
                    println!("session {session_id} complete");
                    live.runner.node_mut().transfer.close(session_id);
                }
                TransferEvent::Aborted { session_id, error } => {
                    println!("session {session_id} aborted: {error}");
                    live.runner.node_mut().transfer.close(session_id);
                }
                _ => {}
            }
        }
    }
    Ok(())
}

fn print_ad(ad: &Advertisement) {
    for ep in &ad.endpoints {
        println!("{ep}");
    }
}

pub fn query_scenario(
    service: &str,
    as_node: &str,
    sc: &ScenarioArgs,
    path: &std::path::Path,
    cfg: GridConfig,
) -> Result<(), CliError> {
    let scenario = Scenario::load(path).map_err(mmgp_core::grid::GridError::from)?;
    let mut grid = Grid::from_scenario(&scenario, cfg)?;
    grid.run_scenario(&scenario, SimTime::from_millis(sc.settle_ms))?;
    let ad = grid.query(as_node, service)?;
    print_ad(&ad);
    Ok(())
}

pub fn query_live(service: &str, name: &str, bind: Ipv4Addr, peers: &[Peer], cfg: &GridConfig) -> Result<(), CliError> {
    if peers.is_empty() {
        return Err(CliError::Usage("query needs --scenario or at least one --peer".into()));
    }
    let mut live = Live::new(name, bind, false, peers, cfg)?;
    let ad = live.query(service)?;
    print_ad(&ad);
    Ok(())
}
