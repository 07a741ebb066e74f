use std::fmt::Write as _;
use std::path::Path;

use mmgp_core::codec::{self, EncoderConfig};
use mmgp_core::grid::{parse_video, CopyOption, CopyRequest, Dims, Grid, GridConfig};
use mmgp_core::metrics::{self, format_value, QualityReport};

use crate::args::LinkArgs;
use crate::error::CliError;
use crate::util;

pub const COMPRESSION_HEADER: &str = "corpus,mode,qstep,size_bytes,compressed_bytes,cp_percent,avg_psnr_db";
pub const TRANSFER_HEADER: &str =
    "corpus,loss,seed,size_bytes,wire_data_bytes,data_packets,retransmits,naks,duration_ms,digest_ok";

fn emit(out: Option<&Path>, csv: &str) -> Result<(), CliError> {
    match out {
        Some(p) => util::write_atomic(p, csv.as_bytes()),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

pub fn compression(
    corpus: &Path,
    out: Option<&Path>,
    qsteps: &[f32],
    dims: Option<Dims>,
    gop: usize,
    levels: usize,
) -> Result<(), CliError> {
    let files = util::corpus_files(corpus)?;
    let mut csv = format!("{COMPRESSION_HEADER}\n");
    for file in files {
        let video = parse_video(&util::read(&file)?, dims)?;
        let label = util::file_label(&file);
        let mut configs = vec![("lossless", String::new(), EncoderConfig::lossless(gop, levels))];
        for &q in qsteps {
            configs.push(("lossy", q.to_string(), EncoderConfig::lossy(gop, levels, q)?));
        }
        for (mode, q, cfg) in configs {
            let stream = codec::encode_to_bytes(&video, &cfg)?;
            let decoded = codec::decode_from_bytes(&stream)?;
            let report = QualityReport::compute(&video, &decoded, video.raw_size() as u64, stream.len() as u64)?;
            let _ = writeln!(csv, "{label},{mode},{q},{}", metrics::csv_row(&report));
        }
    }
    emit(out, &csv)
}

pub fn transfer(
    corpus: &Path,
    out: Option<&Path>,
    losses: &[f64],
    seeds: &[u64],
    link: &LinkArgs,
    cfg: &GridConfig,
) -> Result<(), CliError> {
    let files = util::corpus_files(corpus)?;
    let mut csv = format!("{TRANSFER_HEADER}\n");
    for file in files {
        let content = util::read(&file)?;
        let label = util::file_label(&file);
        for &loss in losses {
            for &seed in seeds {
                let mut grid = Grid::triangle(cfg.clone(), "server", "client", link.link(loss, seed)?)?;
                grid.serve("server", "bench", content.clone())?;
                grid.publish("server", "bench")?;
                let report = grid.mmgp_copy(&CopyRequest {
                    requester: "client".into(),
                    peer: None,
                    service: "bench".into(),
                    option: CopyOption::Udt,
                    dims: None,
                })?;
                let _ = writeln!(
                    csv,
                    "{label},{loss},{seed},{},{},{},{},{},{},{}",
                    content.len(),
                    report.wire_data_bytes,
                    report.data_packets,
                    report.retransmits,
                    report.naks,
                    format_value(Some(report.duration.as_millis_f64())),
                    report.output == content
                );
            }
        }
    }
    emit(out, &csv)
}
