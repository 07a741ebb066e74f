//! dWave: temporal base/residual decomposition, a 2-D lifting wavelet
//! transform with the 9/3 filter pair, dead-zone quantisation and a DEFLATE
//! entropy stage.
//!
//! Encoding runs `split_temporal` → (lossy: `dwt2d_forward` + `quantize` on
//! every plane; lossless: raw integer planes) → little-endian `i32`
//! serialisation → one DEFLATE chunk per temporal group.

pub mod bitstream;
pub mod dwt;
pub mod entropy;
pub mod filters;
mod frame;
pub mod io;
pub mod quant;
pub mod temporal;

use thiserror::Error;

pub use bitstream::{Bitstream, Header};
pub use dwt::{
    dwt1d_forward, dwt1d_inverse, dwt2d_forward, dwt2d_inverse, max_levels, Band, Pyramid,
    SubbandPyramid,
};
pub use entropy::{entropy_decode, entropy_encode};
pub use filters::{derive_synthesis_filters, FilterBank};
pub use frame::{Frame, VideoSequence};
pub use quant::{dequantize, quantize, QuantMode, QuantizerConfig};
pub use temporal::{merge_temporal, split_temporal, TemporalGroup};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("corrupt data: {0}")]
    CorruptData(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CodecError> = std::result::Result<T, E>;

pub const DEFAULT_GOP_SIZE: usize = 2;
pub const DEFAULT_LEVELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub gop_size: usize,
    pub levels: usize,
    pub quantizer: QuantizerConfig,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            gop_size: DEFAULT_GOP_SIZE,
            levels: DEFAULT_LEVELS,
            quantizer: QuantizerConfig::lossless(),
        }
    }
}

impl EncoderConfig {
    pub fn lossy(gop_size: usize, levels: usize, step: f32) -> Result<Self> {
        Ok(Self {
            gop_size,
            levels,
            quantizer: QuantizerConfig::lossy(step)?,
        })
    }

    pub fn lossless(gop_size: usize, levels: usize) -> Self {
        Self {
            gop_size,
            levels,
            quantizer: QuantizerConfig::lossless(),
        }
    }
}

pub fn encode_video(seq: &VideoSequence, config: &EncoderConfig) -> Result<Bitstream> {
    config.quantizer.validate()?;
    let (w, h) = (seq.width(), seq.height());
    let header = Header {
        width: narrow(w, "width")?,
        height: narrow(h, "height")?,
        frame_count: u32::try_from(seq.len())
            .map_err(|_| CodecError::InvalidInput("too many frames".into()))?,
        gop_size: narrow(config.gop_size, "gop_size")?,
        levels: narrow(config.levels, "levels")?,
        quantizer: config.quantizer,
    };
    let max = max_levels(w, h);
    if config.levels == 0 || config.levels > max {
        return Err(CodecError::InvalidInput(format!(
            "{} decomposition levels requested for a {w}x{h} plane; maximum feasible depth is {max}",
            config.levels
        )));
    }

    let bank = FilterBank::cdf93();
    let groups = split_temporal(seq, config.gop_size)?;
    let mut chunks = Vec::with_capacity(groups.len());
    for group in &groups {
        let mut raw = Vec::with_capacity(group.frame_count() * w * h * 4);
        let base: Vec<i32> = group.base.plane().iter().map(|&v| i32::from(v)).collect();
        encode_plane(&base, w, h, config, &bank, &mut raw)?;
        for residual in &group.residuals {
            let residual: Vec<i32> = residual.iter().map(|&v| i32::from(v)).collect();
            encode_plane(&residual, w, h, config, &bank, &mut raw)?;
        }
        chunks.push(entropy_encode(&raw));
    }
    Ok(Bitstream { header, chunks })
}

fn narrow<T: TryFrom<usize>>(v: usize, what: &str) -> Result<T> {
    T::try_from(v).map_err(|_| CodecError::InvalidInput(format!("{what} {v} does not fit the container")))
}

fn encode_plane(
    samples: &[i32],
    w: usize,
    h: usize,
    config: &EncoderConfig,
    bank: &FilterBank,
    out: &mut Vec<u8>,
) -> Result<()> {
    if config.quantizer.is_lossless() {
        for v in samples {
            out.extend_from_slice(&v.to_le_bytes());
        }
        return Ok(());
    }
    let plane = Band::new(w, h, samples.iter().map(|&v| f64::from(v)).collect())?;
    let pyramid = dwt2d_forward(&plane, config.levels, bank)?;
    let q = quantize(&pyramid, &config.quantizer);
    for band in q.bands() {
        for v in &band.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(())
}

pub fn decode_video(bs: &Bitstream) -> Result<VideoSequence> {
    let header = &bs.header;
    let (w, h) = (usize::from(header.width), usize::from(header.height));
    let levels = usize::from(header.levels);
    let gop = usize::from(header.gop_size);
    let frames = header.frame_count as usize;
    if bs.chunks.len() != header.group_count() {
        return Err(CodecError::CorruptData(format!(
            "{} chunks present, header implies {}",
            bs.chunks.len(),
            header.group_count()
        )));
    }
    if levels == 0 || levels > max_levels(w, h) {
        return Err(CodecError::CorruptData(format!(
            "header declares {levels} levels for a {w}x{h} plane"
        )));
    }

    let bank = FilterBank::cdf93();
    let plane_len = w * h;
    let mut groups = Vec::with_capacity(bs.chunks.len());
    let mut out_frames = Vec::with_capacity(frames);
    for (g, chunk) in bs.chunks.iter().enumerate() {
        let in_group = gop.min(frames - g * gop);
        let raw = entropy_decode(chunk)?;
        if raw.len() != in_group * plane_len * 4 {
            return Err(CodecError::CorruptData(format!(
                "group {g} inflates to {} bytes, expected {}",
                raw.len(),
                in_group * plane_len * 4
            )));
        }
        let values: Vec<i32> = raw
            .chunks_exact(4)
            .map(|b| i32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let mut planes = values.chunks_exact(plane_len);

        if header.quantizer.is_lossless() {
            let base = planes.next().expect("group holds at least one plane");
            let base = base
                .iter()
                .map(|&v| u8::try_from(v))
                .collect::<Result<Vec<u8>, _>>()
                .map_err(|_| CodecError::CorruptData(format!("group {g} base sample out of range")))?;
            let residuals = planes
                .map(|p| {
                    p.iter()
                        .map(|&v| i16::try_from(v))
                        .collect::<Result<Vec<i16>, _>>()
                        .map_err(|_| {
                            CodecError::CorruptData(format!("group {g} residual out of range"))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            groups.push(TemporalGroup {
                base: Frame::new(w, h, base, g * gop)?,
                residuals,
                gop_size: gop,
            });
        } else {
            let mut decoded = planes.map(|p| decode_lossy_plane(p, w, h, levels, header, &bank));
            let base = decoded.next().expect("group holds at least one plane")?;
            let base: Vec<u8> = base.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
            let mut group_frames = Vec::with_capacity(in_group);
            for residual in decoded {
                let plane = residual?
                    .iter()
                    .zip(&base)
                    .map(|(r, &b)| {
                        let r = r.round().clamp(-255.0, 255.0);
                        (f64::from(b) + r).clamp(0.0, 255.0) as u8
                    })
                    .collect::<Vec<u8>>();
                group_frames.push(plane);
            }
            out_frames.push(base);
            out_frames.extend(group_frames);
        }
    }

    if header.quantizer.is_lossless() {
        return merge_temporal(&groups);
    }
    let frames = out_frames
        .into_iter()
        .enumerate()
        .map(|(i, plane)| Frame::new(w, h, plane, i))
        .collect::<Result<Vec<_>>>()?;
    VideoSequence::new(w, h, frames)
}

fn decode_lossy_plane(
    values: &[i32],
    w: usize,
    h: usize,
    levels: usize,
    header: &Header,
    bank: &FilterBank,
) -> Result<Vec<f64>> {
    let mut q = Pyramid::<i32>::zeros(w, h, levels)?;
    let mut cursor = values.iter();
    for band in q.bands_mut() {
        for slot in band.data.iter_mut() {
            *slot = *cursor.next().expect("plane length was checked");
        }
    }
    let pyramid = dequantize(&q, &header.quantizer);
    Ok(dwt2d_inverse(&pyramid, bank)?.data)
}

/// Encodes and serialises in one step.
pub fn encode_to_bytes(seq: &VideoSequence, config: &EncoderConfig) -> Result<Vec<u8>> {
    Ok(encode_video(seq, config)?.to_bytes())
}

/// Parses and decodes in one step.
pub fn decode_from_bytes(bytes: &[u8]) -> Result<VideoSequence> {
    decode_video(&Bitstream::from_bytes(bytes)?)
}
