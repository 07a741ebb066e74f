use std::path::Path;

use mmgp_core::codec::{self, io};
use mmgp_core::grid::parse_video;
use mmgp_core::metrics::{self, QualityReport, ReportFormat};

use crate::args::{CodecArgs, DimArgs, ReportFormatArg};
use crate::error::CliError;
use crate::util;

pub fn encode(
    input: &Path,
    output: &Path,
    dims: &DimArgs,
    codec: &CodecArgs,
    report: Option<&Path>,
    format: ReportFormatArg,
) -> Result<(), CliError> {
    let bytes = util::read(input)?;
    let video = parse_video(&bytes, dims.dims())?;
    let cfg = codec.encoder()?;
    let stream = codec::encode_to_bytes(&video, &cfg)?;
    if let Some(path) = report {
        let decoded = codec::decode_from_bytes(&stream)?;
        let q = QualityReport::compute(&video, &decoded, video.raw_size() as u64, stream.len() as u64)?;
        let text = match format {
            ReportFormatArg::Csv => {
                let empty = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
                let mut s = String::new();
                if empty {
                    s.push_str(metrics::CSV_HEADER);
                    s.push('\n');
                }
                s.push_str(&metrics::csv_row(&q));
                s.push('\n');
                s
            }
            ReportFormatArg::Text => metrics::emit_report(&q, ReportFormat::Text),
        };
        util::write_atomic(output, &stream)?;
        util::append(path, &text)?;
    } else {
        util::write_atomic(output, &stream)?;
    }
    println!(
        "encoded {} frames {}x{}: {} -> {} bytes",
        video.len(),
        video.width(),
        video.height(),
        video.raw_size(),
        stream.len()
    );
    Ok(())
}

pub fn decode(input: &Path, output: &Path, pgm: bool) -> Result<(), CliError> {
    let bytes = util::read(input)?;
    let video = codec::decode_from_bytes(&bytes)?;
    let out = if pgm {
        io::to_pgm_sequence(&video)
    } else {
        video.to_planes()
    };
    util::write_atomic(output, &out)?;
    println!(
        "decoded {} frames {}x{} ({} bytes)",
        video.len(),
        video.width(),
        video.height(),
        out.len()
    );
    Ok(())
}
