mod args;
mod bench;
mod copy;
mod dwave;
mod error;
mod live;
mod node;
mod sim;
mod util;

use std::process::ExitCode;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::Parser;
use mmgp_core::net::SimTime;

use args::{grid_config, BenchOp, Cli, Command, DwaveOp, NodeOp, SimOp};
use error::{CliError, Exit};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::from(Exit::Ok as u8),
                _ => ExitCode::from(Exit::Usage as u8),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(Exit::Ok as u8),
        Err(e) => {
            eprintln!("mmgp: {e}");
            ExitCode::from(e.exit() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Dwave { op } => match op {
            DwaveOp::Encode {
                input,
                output,
                dims,
                codec,
                report,
                report_format,
            } => dwave::encode(&input, &output, &dims, &codec, report.as_deref(), report_format),
            DwaveOp::Decode { input, output, pgm } => dwave::decode(&input, &output, pgm),
        },
        Command::Node { op } => match op {
            NodeOp::Serve {
                name,
                bind,
                super_node,
                peers,
                publish,
                compress,
                dims,
                codec,
                duration_s,
                overlay,
                transfer,
            } => {
                let cfg = grid_config(&overlay, &transfer)?;
                node::serve(
                    node::ServeOptions {
                        name: &name,
                        bind,
                        super_node,
                        peers: &peers,
                        publish: &publish,
                        compress: compress.then_some((&codec, &dims)),
                        duration: duration_s.map(Duration::from_secs),
                    },
                    &cfg,
                )
            }
            NodeOp::Query {
                service,
                as_node,
                scenario,
                bind,
                peers,
                overlay,
            } => {
                let cfg = mmgp_core::grid::GridConfig {
                    overlay: overlay.config()?,
                    ..Default::default()
                };
                match &scenario.scenario {
                    Some(path) => node::query_scenario(&service, &as_node, &scenario, path, cfg),
                    None => node::query_live(&service, &as_node, bind, &peers, &cfg),
                }
            }
        },
        Command::Copy(args) => {
            let cfg = grid_config(&args.overlay, &args.transfer)?;
            copy::run(&args, cfg)
        }
        Command::Bench { op } => match op {
            BenchOp::Compression {
                corpus,
                out,
                qsteps,
                dims,
                gop,
                levels,
            } => bench::compression(&corpus, out.as_deref(), &qsteps, dims.dims(), gop, levels),
            BenchOp::Transfer {
                corpus,
                out,
                losses,
                seeds,
                link,
                transfer,
            } => {
                let cfg = mmgp_core::grid::GridConfig {
                    transfer: transfer.config()?,
                    key: transfer.key.as_bytes().to_vec(),
                    ..Default::default()
                };
                bench::transfer(&corpus, out.as_deref(), &losses, &seeds, &link, &cfg)
            }
        },
        Command::Sim { op } => match op {
            SimOp::Run {
                scenario,
                trace,
                settle_ms,
                overlay,
                transfer,
            } => {
                let cfg = grid_config(&overlay, &transfer)?;
                sim::run(&scenario, trace.as_deref(), SimTime::from_millis(settle_ms), cfg)
            }
        },
    }
}
