//! Reconstruction quality and compression efficiency.
//!
//! Samples are normalised to `[0, 1]` before the squared error is taken, so
//! `PSNR = 10 log10(1 / MSE)` is the usual peak-referenced figure.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::codec::{Frame, VideoSequence};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

pub fn mse(f: &Frame, g: &Frame) -> Result<f64> {
    if f.width() != g.width() || f.height() != g.height() {
        return Err(MetricsError::InvalidInput(format!(
            "cannot compare a {}x{} frame with a {}x{} frame",
            f.width(),
            f.height(),
            g.width(),
            g.height()
        )));
    }
    mse_planes(f.plane(), g.plane())
}

pub fn mse_planes(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(MetricsError::InvalidInput(format!(
            "plane lengths {} and {} cannot be compared",
            a.len(),
            b.len()
        )));
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = (f64::from(x) - f64::from(y)) / 255.0;
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}

/// `10 log10(1 / mse)`; an MSE of zero yields `f64::INFINITY`.
pub fn psnr(mse_value: f64) -> Result<f64> {
    if mse_value.is_nan() || mse_value < 0.0 {
        return Err(MetricsError::InvalidInput(format!(
            "MSE must be non-negative, got {mse_value}"
        )));
    }
    if mse_value == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse_value).log10())
}

/// `100 (osize - csize) / osize`. Sizes may be in any common unit.
pub fn compression_percentage(osize: f64, csize: f64) -> Result<f64> {
    if osize.is_nan() || osize <= 0.0 || csize.is_nan() || csize < 0.0 {
        return Err(MetricsError::InvalidInput(format!(
            "need original size > 0 and compressed size >= 0, got {osize} and {csize}"
        )));
    }
    Ok(100.0 * (osize - csize) / osize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub frame_mse: Vec<f64>,
    pub frame_psnr: Vec<f64>,
    /// Mean of the finite per-frame PSNRs. `INFINITY` when every frame is
    /// identical, `None` when there are no frames.
    pub average_psnr: Option<f64>,
    /// Frames reconstructed exactly; excluded from the average.
    pub identical_frames: usize,
    pub original_size: u64,
    pub compressed_size: u64,
    /// `None` when the original size is zero.
    pub compression_percentage: Option<f64>,
}

impl QualityReport {
    pub fn compute(
        original: &VideoSequence,
        decoded: &VideoSequence,
        original_size: u64,
        compressed_size: u64,
    ) -> Result<Self> {
        if original.len() != decoded.len() {
            return Err(MetricsError::InvalidInput(format!(
                "original has {} frames, decoded has {}",
                original.len(),
                decoded.len()
            )));
        }
        let frame_mse = original
            .frames()
            .iter()
            .zip(decoded.frames())
            .map(|(f, g)| mse(f, g))
            .collect::<Result<Vec<_>>>()?;
        Self::from_mse(frame_mse, original_size, compressed_size)
    }

    pub fn from_mse(frame_mse: Vec<f64>, original_size: u64, compressed_size: u64) -> Result<Self> {
        let frame_psnr = frame_mse.iter().map(|&m| psnr(m)).collect::<Result<Vec<_>>>()?;
        let finite: Vec<f64> = frame_psnr.iter().copied().filter(|p| p.is_finite()).collect();
        let identical_frames = frame_psnr.len() - finite.len();
        let average_psnr = match (frame_psnr.len(), finite.len()) {
            (0, _) => None,
            (_, 0) => Some(f64::INFINITY),
            (_, n) => Some(finite.iter().sum::<f64>() / n as f64),
        };
        let compression_percentage = if original_size > 0 {
            Some(compression_percentage(original_size as f64, compressed_size as f64)?)
        } else {
            None
        };
        Ok(Self {
            frame_mse,
            frame_psnr,
            average_psnr,
            identical_frames,
            original_size,
            compressed_size,
            compression_percentage,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Text,
}

impl FromStr for ReportFormat {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "text" => Ok(Self::Text),
            other => Err(MetricsError::InvalidInput(format!("unknown report format {other:?}"))),
        }
    }
}

pub const CSV_HEADER: &str = "size_bytes,compressed_bytes,cp_percent,avg_psnr_db";

/// Fixed 4-decimal rendering; infinities print as `inf`, missing values as
/// an empty field.
pub fn format_value(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v == f64::INFINITY => "inf".to_string(),
        Some(v) if v == f64::NEG_INFINITY => "-inf".to_string(),
        Some(v) => format!("{v:.4}"),
    }
}

/// CSV data row without the trailing newline.
pub fn csv_row(report: &QualityReport) -> String {
    format!(
        "{},{},{},{}",
        report.original_size,
        report.compressed_size,
        format_value(report.compression_percentage),
        format_value(report.average_psnr)
    )
}

pub fn emit_report(report: &QualityReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            if !report.frame_mse.is_empty() {
                out.push_str(&csv_row(report));
                out.push('\n');
            }
        }
        ReportFormat::Text => {
            let _ = writeln!(out, "original size     {} bytes", report.original_size);
            let _ = writeln!(out, "compressed size   {} bytes", report.compressed_size);
            let _ = writeln!(
                out,
                "compression       {} %",
                format_value(report.compression_percentage)
            );
            let _ = writeln!(out, "average PSNR      {} dB", format_value(report.average_psnr));
            let _ = writeln!(out, "identical frames  {}", report.identical_frames);
            for (i, (m, p)) in report.frame_mse.iter().zip(&report.frame_psnr).enumerate() {
                let _ = writeln!(out, "frame {i:>5}  mse {m:.8}  psnr {} dB", format_value(Some(*p)));
            }
        }
    }
    out
}
