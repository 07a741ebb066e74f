use std::time::Duration;

use mmgp_core::codec;
use mmgp_core::grid::{CopyOption, CopyRequest, Grid, GridConfig, TransferReport};
use mmgp_core::metrics::format_value;
use mmgp_core::net::SimTime;
use mmgp_core::simnet::Scenario;

use crate::args::CopyArgs;
use crate::error::CliError;
use crate::live::Live;
use crate::util;

/// Splits `<peer>/<service>`; the service part may itself contain slashes.
pub fn parse_from(from: &str) -> Result<(Option<String>, String), CliError> {
    let (peer, service) = from
        .split_once('/')
        .ok_or_else(|| CliError::Usage(format!("--from expects <peer>/<service>, got {from:?}")))?;
    if service.is_empty() {
        return Err(CliError::Usage("--from has an empty service name".into()));
    }
    let peer = (!peer.is_empty()).then(|| peer.to_string());
    Ok((peer, service.to_string()))
}

pub fn run(args: &CopyArgs, cfg: GridConfig) -> Result<(), CliError> {
    let (peer, service) = parse_from(&args.from)?;
    if !args.peers.is_empty() {
        return run_live(args, &cfg, peer.as_deref(), &service);
    }
    let option = if args.compress {
        CopyOption::Compress(args.codec.encoder()?)
    } else {
        CopyOption::Udt
    };
    let mut grid = if let Some(path) = &args.scenario.scenario {
        let sc = Scenario::load(path).map_err(mmgp_core::grid::GridError::from)?;
        let mut grid = Grid::from_scenario(&sc, cfg)?;
        grid.run_scenario(&sc, SimTime::from_millis(args.scenario.settle_ms))?;
        grid
    } else {
        let source = args.source.as_ref().ok_or_else(|| {
            CliError::Usage("copy needs --source, --scenario or --peer".into())
        })?;
        let content = util::read(source)?;
        let server = peer.clone().unwrap_or_else(|| "server".to_string());
        if server == args.as_node {
            return Err(CliError::Usage("--from peer and --as must differ".into()));
        }
        let link = args.link.link(args.loss, args.seed)?;
        let mut grid = Grid::triangle(cfg, &server, &args.as_node, link)?;
        grid.serve(&server, &service, content)?;
        grid.publish(&server, &service)?;
        grid
    };
    let req = CopyRequest {
        requester: args.as_node.clone(),
        peer,
        service,
        option,
        dims: args.dims.dims(),
    };
    let report = grid.mmgp_copy(&req)?;
    util::write_atomic(&args.to, &report.output)?;
    print!("{}", format_report(&report));
    Ok(())
}

pub fn format_report(r: &TransferReport) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| s.push_str(&format!("{k:<16}{v}\n"));
    line("endpoint", r.endpoint.to_string());
    line("source bytes", r.source_bytes.to_string());
    line("stream bytes", r.stream_bytes.to_string());
    line("wire data bytes", r.wire_data_bytes.to_string());
    line("data packets", r.data_packets.to_string());
    line("retransmits", r.retransmits.to_string());
    line("naks", r.naks.to_string());
    line("duration ms", format!("{:.3}", r.duration.as_millis_f64()));
    if let Some(q) = &r.quality {
        line("cp percent", format_value(q.compression_percentage));
        line("avg psnr db", format_value(q.average_psnr));
    }
    s
}

fn run_live(args: &CopyArgs, cfg: &GridConfig, peer: Option<&str>, service: &str) -> Result<(), CliError> {
    let mut live = Live::new(&args.as_node, args.bind, false, &args.peers, cfg)?;
    let ad = live.query(service)?;
    if let Some(p) = peer {
        if ad.node_id != mmgp_core::overlay::NodeId::from_name(p) {
            return Err(CliError::Grid(
                mmgp_core::overlay::OverlayError::NotFound(format!("{p}/{service}")).into(),
            ));
        }
    }
    let (ep, data, took) = live.fetch(&ad, Duration::from_secs(args.timeout_s))?;
    let received = data.len();
    let output = if args.compress {
        codec::decode_from_bytes(&data)?.to_planes()
    } else {
        data
    };
    util::write_atomic(&args.to, &output)?;
    println!("{:<16}{ep}", "endpoint");
    println!("{:<16}{received}", "stream bytes");
    println!("{:<16}{:.3}", "duration ms", took.as_secs_f64() * 1000.0);
    Ok(())
}
