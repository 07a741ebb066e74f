use std::net::{Ipv4Addr, SocketAddrV4};
use std::path::PathBuf;

use clap::builder::TypedValueParser;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use mmgp_core::codec::{EncoderConfig, DEFAULT_GOP_SIZE, DEFAULT_LEVELS};
use mmgp_core::grid::{Dims, GridConfig};
use mmgp_core::net::SimTime;
use mmgp_core::overlay::OverlayConfig;
use mmgp_core::simnet::SimLink;
use mmgp_core::transfer::TransferConfig;

use crate::error::CliError;

fn ov() -> OverlayConfig {
    OverlayConfig::default()
}

fn tr() -> TransferConfig {
    TransferConfig::default()
}

fn ms(t: SimTime) -> u64 {
    t.as_micros() / 1000
}

pub const DEFAULT_KEY: &str = "mmgp-grid";
pub const DEFAULT_QSTEPS: &str = "1,2,4,8,16";
pub const DEFAULT_LOSSES: &str = "0,0.05,0.1,0.2,0.3";
pub const DEFAULT_SEEDS: &str = "1,2,3";

#[derive(Debug, Parser)]
#[command(name = "mmgp", version, about = "Wavelet video codec, overlay discovery and reliable UDP transfer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode or decode dWave bitstreams.
    Dwave {
        #[command(subcommand)]
        op: DwaveOp,
    },
    /// Run or query overlay nodes over real UDP or a scenario.
    Node {
        #[command(subcommand)]
        op: NodeOp,
    },
    /// Download a published service with raw or compressed transfer.
    Copy(CopyArgs),
    /// Compression and transfer benchmarks.
    Bench {
        #[command(subcommand)]
        op: BenchOp,
    },
    /// Network simulator tools.
    Sim {
        #[command(subcommand)]
        op: SimOp,
    },
}

#[derive(Debug, Args, Clone)]
pub struct CodecArgs {
    /// Frames per temporal group.
    #[arg(long, env = "MMGP_GOP", default_value_t = DEFAULT_GOP_SIZE, value_parser = clap::value_parser!(u8).range(1..).map(usize::from))]
    pub gop: usize,
    /// Wavelet decomposition depth.
    #[arg(long, env = "MMGP_LEVELS", default_value_t = DEFAULT_LEVELS, value_parser = clap::value_parser!(u8).range(0..=15).map(usize::from))]
    pub levels: usize,
    /// Quantizer step, or `lossless`.
    #[arg(long, env = "MMGP_QSTEP", default_value = "lossless", value_parser = parse_qstep)]
    pub qstep: QStep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QStep(pub Option<f32>);

fn parse_qstep(s: &str) -> Result<QStep, String> {
    if s == "lossless" {
        return Ok(QStep(None));
    }
    let v: f32 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err("qstep must be a positive number".into());
    }
    Ok(QStep(Some(v)))
}

impl CodecArgs {
    pub fn encoder(&self) -> Result<EncoderConfig, CliError> {
        Ok(match self.qstep.0 {
            None => EncoderConfig::lossless(self.gop, self.levels),
            Some(q) => EncoderConfig::lossy(self.gop, self.levels, q)?,
        })
    }
}

#[derive(Debug, Args, Clone)]
pub struct DimArgs {
    /// Frame width for raw Y8 input.
    #[arg(long, env = "MMGP_WIDTH", requires = "height")]
    pub width: Option<usize>,
    /// Frame height for raw Y8 input.
    #[arg(long, env = "MMGP_HEIGHT", requires = "width")]
    pub height: Option<usize>,
}

impl DimArgs {
    pub fn dims(&self) -> Option<Dims> {
        match (self.width, self.height) {
            (Some(width), Some(height)) => Some(Dims { width, height }),
            _ => None,
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct TransferArgs {
    /// Largest DATA payload in bytes.
    #[arg(long, env = "MMGP_MSS", default_value_t = tr().mss)]
    pub mss: usize,
    /// ACK interval in milliseconds.
    #[arg(long, env = "MMGP_ACK_INTERVAL_MS", default_value_t = ms(tr().ack_interval))]
    pub ack_interval_ms: u64,
    /// Starting rate in packets per ACK interval.
    #[arg(long, env = "MMGP_INITIAL_RATE", default_value_t = tr().initial_rate)]
    pub initial_rate: f64,
    /// Lowest rate in packets per ACK interval.
    #[arg(long, env = "MMGP_RATE_FLOOR", default_value_t = tr().rate_floor)]
    pub rate_floor: f64,
    /// Highest rate in packets per ACK interval.
    #[arg(long, env = "MMGP_RATE_CEILING", default_value_t = tr().rate_ceiling)]
    pub rate_ceiling: f64,
    /// Rate multiplier after a loss-free interval.
    #[arg(long, env = "MMGP_RATE_INCREASE", default_value_t = tr().increase_factor)]
    pub rate_increase: f64,
    /// Rate multiplier on each NAK.
    #[arg(long, env = "MMGP_RATE_DECREASE", default_value_t = tr().decrease_factor)]
    pub rate_decrease: f64,
    /// Most unacknowledged packets in flight.
    #[arg(long, env = "MMGP_WINDOW", default_value_t = tr().window)]
    pub window: u32,
    /// Handshake retransmit timeout in milliseconds.
    #[arg(long, env = "MMGP_HANDSHAKE_TIMEOUT_MS", default_value_t = ms(tr().handshake_timeout))]
    pub handshake_timeout_ms: u64,
    /// Handshake retransmissions before giving up.
    #[arg(long, env = "MMGP_HANDSHAKE_RETRIES", default_value_t = tr().handshake_retries)]
    pub handshake_retries: u32,
    /// Abort after this long without hearing from the peer, in milliseconds.
    #[arg(long, env = "MMGP_DEAD_TIMEOUT_MS", default_value_t = ms(tr().dead_timeout))]
    pub dead_timeout_ms: u64,
    /// Pre-shared handshake key.
    #[arg(long, env = "MMGP_KEY", default_value = DEFAULT_KEY)]
    pub key: String,
}

impl TransferArgs {
    pub fn config(&self) -> Result<TransferConfig, CliError> {
        let cfg = TransferConfig {
            mss: self.mss,
            ack_interval: SimTime::from_millis(self.ack_interval_ms),
            initial_rate: self.initial_rate,
            rate_floor: self.rate_floor,
            rate_ceiling: self.rate_ceiling,
            increase_factor: self.rate_increase,
            decrease_factor: self.rate_decrease,
            window: self.window,
            handshake_timeout: SimTime::from_millis(self.handshake_timeout_ms),
            handshake_retries: self.handshake_retries,
            dead_timeout: SimTime::from_millis(self.dead_timeout_ms),
            ..TransferConfig::default()
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Clone)]
pub struct OverlayArgs {
    /// Super-node maintenance period in milliseconds.
    #[arg(long, env = "MMGP_PING_PERIOD_MS", default_value_t = ms(ov().ping_period))]
    pub ping_period_ms: u64,
    /// Wait for a PONG this long, in milliseconds.
    #[arg(long, env = "MMGP_PING_TIMEOUT_MS", default_value_t = ms(ov().ping_timeout))]
    pub ping_timeout_ms: u64,
    /// Peers pinged per period.
    #[arg(long, env = "MMGP_PING_SUBSET", default_value_t = ov().ping_subset)]
    pub ping_subset: usize,
    /// Missed pings before a peer is purged.
    #[arg(long, env = "MMGP_PURGE_THRESHOLD", default_value_t = ov().purge_threshold)]
    pub purge_threshold: u32,
    /// Advertisement lifetime in seconds.
    #[arg(long, env = "MMGP_AD_TTL_S", default_value_t = ms(ov().ad_ttl) / 1000)]
    pub ad_ttl_s: u64,
    /// Forwarding budget for queries.
    #[arg(long, env = "MMGP_MAX_HOPS", default_value_t = ov().max_hops)]
    pub max_hops: u8,
    /// Query deadline in milliseconds.
    #[arg(long, env = "MMGP_QUERY_TIMEOUT_MS", default_value_t = ms(ov().query_timeout))]
    pub query_timeout_ms: u64,
    /// Advertisement acknowledgement timeout in milliseconds.
    #[arg(long, env = "MMGP_PUBLISH_TIMEOUT_MS", default_value_t = ms(ov().publish_timeout))]
    pub publish_timeout_ms: u64,
    /// Advertisement retransmissions before discovery fails.
    #[arg(long, env = "MMGP_PUBLISH_RETRIES", default_value_t = ov().publish_retries)]
    pub publish_retries: u32,
}

impl OverlayArgs {
    pub fn config(&self) -> Result<OverlayConfig, CliError> {
        let cfg = OverlayConfig {
            ping_period: SimTime::from_millis(self.ping_period_ms),
            ping_timeout: SimTime::from_millis(self.ping_timeout_ms),
            ping_subset: self.ping_subset,
            purge_threshold: self.purge_threshold,
            ad_ttl: SimTime::from_secs(self.ad_ttl_s),
            max_hops: self.max_hops,
            query_timeout: SimTime::from_millis(self.query_timeout_ms),
            publish_timeout: SimTime::from_millis(self.publish_timeout_ms),
            publish_retries: self.publish_retries,
            ..OverlayConfig::default()
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

pub fn grid_config(o: &OverlayArgs, t: &TransferArgs) -> Result<GridConfig, CliError> {
    Ok(GridConfig {
        overlay: o.config()?,
        transfer: t.config()?,
        key: t.key.as_bytes().to_vec(),
        ..GridConfig::default()
    })
}

#[derive(Debug, Args, Clone)]
pub struct LinkArgs {
    /// One-way latency of the simulated link in milliseconds.
    #[arg(long, env = "MMGP_LATENCY_MS", default_value_t = 5)]
    pub latency_ms: u64,
    /// Bandwidth cap of the simulated link in bytes per second, 0 for none.
    #[arg(long, env = "MMGP_BW", default_value_t = 0)]
    pub bw: u64,
}

impl LinkArgs {
    pub fn link(&self, loss: f64, seed: u64) -> Result<SimLink, CliError> {
        let link = SimLink::fixed_ms(self.latency_ms)
            .with_loss(loss)
            .with_bandwidth(self.bw)
            .with_seed(seed);
        link.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(link)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormatArg {
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum DwaveOp {
    /// Encode raw Y8 planes or a PGM sequence into a .dwv bitstream.
    Encode {
        /// Raw Y8 or PGM-sequence input.
        #[arg(long, short)]
        input: PathBuf,
        /// Bitstream output.
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        dims: DimArgs,
        #[command(flatten)]
        codec: CodecArgs,
        /// Append a quality report for the encoded result to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Layout of the appended report.
        #[arg(long, value_enum, default_value_t = ReportFormatArg::Csv)]
        report_format: ReportFormatArg,
    },
    /// Decode a .dwv bitstream into raw Y8 planes.
    Decode {
        /// Bitstream input.
        #[arg(long, short)]
        input: PathBuf,
        /// Raw Y8 output.
        #[arg(long, short)]
        output: PathBuf,
        /// Write a PGM sequence instead of raw planes.
        #[arg(long)]
        pgm: bool,
    },
}

#[derive(Debug, Args, Clone)]
pub struct ScenarioArgs {
    /// Scenario script to simulate instead of using real sockets.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Simulated time allowed for the scenario's actions, in milliseconds.
    #[arg(long, default_value_t = 5000)]
    pub settle_ms: u64,
}

#[derive(Debug, Subcommand)]
pub enum NodeOp {
    /// Run an edge or super node over UDP until stopped.
    Serve {
        /// Node name; the overlay id is derived from it.
        #[arg(long, env = "MMGP_NAME")]
        name: String,
        /// Local address to bind.
        #[arg(long, env = "MMGP_BIND", default_value_t = Ipv4Addr::LOCALHOST)]
        bind: Ipv4Addr,
        /// Run as a super node.
        #[arg(long = "super")]
        super_node: bool,
        /// Super node to use, as <name>@<ip:port>; repeatable.
        #[arg(long = "peer", value_parser = parse_peer)]
        peers: Vec<Peer>,
        /// Serve a file as a service, as <service>=<path>; repeatable.
        #[arg(long, value_parser = parse_publish)]
        publish: Vec<(String, PathBuf)>,
        /// Encode published files before serving them.
        #[arg(long)]
        compress: bool,
        #[command(flatten)]
        dims: DimArgs,
        #[command(flatten)]
        codec: CodecArgs,
        /// Stop after this many seconds.
        #[arg(long)]
        duration_s: Option<u64>,
        #[command(flatten)]
        overlay: OverlayArgs,
        #[command(flatten)]
        transfer: TransferArgs,
    },
    /// Resolve a service and print the advertised endpoints.
    Query {
        /// Service name.
        service: String,
        /// Querying node: a scenario node name, or the local name over UDP.
        #[arg(long = "as", default_value = "mmgp-query")]
        as_node: String,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Local address to bind over UDP.
        #[arg(long, env = "MMGP_BIND", default_value_t = Ipv4Addr::LOCALHOST)]
        bind: Ipv4Addr,
        /// Super node to ask over UDP, as <name>@<ip:port>; repeatable.
        #[arg(long = "peer", value_parser = parse_peer)]
        peers: Vec<Peer>,
        #[command(flatten)]
        overlay: OverlayArgs,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peer {
    pub name: String,
    pub addr: SocketAddrV4,
}

fn parse_peer(s: &str) -> Result<Peer, String> {
    let (name, addr) = s.split_once('@').ok_or("expected <name>@<ip:port>")?;
    if name.is_empty() {
        return Err("empty peer name".into());
    }
    let addr = addr.parse().map_err(|_| format!("bad address {addr:?}"))?;
    Ok(Peer {
        name: name.to_string(),
        addr,
    })
}

fn parse_publish(s: &str) -> Result<(String, PathBuf), String> {
    let (service, path) = s.split_once('=').ok_or("expected <service>=<path>")?;
    if service.is_empty() || path.is_empty() {
        return Err("expected <service>=<path>".into());
    }
    Ok((service.to_string(), PathBuf::from(path)))
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["udt", "compress"])))]
pub struct CopyArgs {
    /// What to fetch, as <peer>/<service>; an empty peer accepts any advertiser.
    #[arg(long)]
    pub from: String,
    /// Where to write the result.
    #[arg(long)]
    pub to: PathBuf,
    /// Send the file bytes as they are.
    #[arg(long)]
    pub udt: bool,
    /// Encode with dWave before sending and decode on arrival.
    #[arg(long)]
    pub compress: bool,
    #[command(flatten)]
    pub codec: CodecArgs,
    #[command(flatten)]
    pub dims: DimArgs,
    /// File the peer serves, for the built-in three-node simulation.
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Requesting node: a scenario node name, or the local name otherwise.
    #[arg(long = "as", default_value = "local")]
    pub as_node: String,
    /// Use real UDP through this super node, as <name>@<ip:port>; repeatable.
    #[arg(long = "peer", value_parser = parse_peer)]
    pub peers: Vec<Peer>,
    /// Local address to bind over UDP.
    #[arg(long, env = "MMGP_BIND", default_value_t = Ipv4Addr::LOCALHOST)]
    pub bind: Ipv4Addr,
    /// Give up on a real-UDP copy after this many seconds.
    #[arg(long, default_value_t = 60)]
    pub timeout_s: u64,
    #[command(flatten)]
    pub link: LinkArgs,
    /// Loss probability of the simulated link.
    #[arg(long, env = "MMGP_LOSS", default_value_t = 0.0)]
    pub loss: f64,
    /// Seed of the simulated link.
    #[arg(long, env = "MMGP_SEED", default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub overlay: OverlayArgs,
    #[command(flatten)]
    pub transfer: TransferArgs,
}

#[derive(Debug, Subcommand)]
pub enum BenchOp {
    /// Sweep quantizer steps and report size, CP and PSNR per corpus file.
    Compression {
        /// Corpus file or directory of files.
        #[arg(long)]
        corpus: PathBuf,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Quantizer steps to sweep after the lossless row.
        #[arg(long, default_value = DEFAULT_QSTEPS, value_delimiter = ',')]
        qsteps: Vec<f32>,
        #[command(flatten)]
        dims: DimArgs,
        /// Frames per temporal group.
        #[arg(long, env = "MMGP_GOP", default_value_t = DEFAULT_GOP_SIZE)]
        gop: usize,
        /// Wavelet decomposition depth.
        #[arg(long, env = "MMGP_LEVELS", default_value_t = DEFAULT_LEVELS)]
        levels: usize,
    },
    /// Sweep link loss and seeds over the simulator with raw copies.
    Transfer {
        /// Corpus file or directory of files.
        #[arg(long)]
        corpus: PathBuf,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Loss probabilities to sweep.
        #[arg(long, default_value = DEFAULT_LOSSES, value_delimiter = ',')]
        losses: Vec<f64>,
        /// Link seeds to sweep.
        #[arg(long, default_value = DEFAULT_SEEDS, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[command(flatten)]
        link: LinkArgs,
        #[command(flatten)]
        transfer: TransferArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum SimOp {
    /// Run a scenario script and print the outcome of each action.
    Run {
        /// Scenario script.
        #[arg(long)]
        scenario: PathBuf,
        /// Write the packet trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Simulated time allowed after the last action, in milliseconds.
        #[arg(long, default_value_t = 5000)]
        settle_ms: u64,
        #[command(flatten)]
        overlay: OverlayArgs,
        #[command(flatten)]
        transfer: TransferArgs,
    },
}
