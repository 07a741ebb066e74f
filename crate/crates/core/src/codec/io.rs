//! Input adapters: headerless Y8 planes, PGM sequences and RGB-to-luma.

use std::fs;
use std::path::Path;

use super::{CodecError, Frame, Result, VideoSequence};

pub fn read_y8(path: &Path, width: usize, height: usize) -> Result<VideoSequence> {
    let bytes = fs::read(path)?;
    VideoSequence::from_planes(width, height, &bytes)
}

pub fn write_y8(path: &Path, seq: &VideoSequence) -> Result<()> {
    fs::write(path, seq.to_planes())?;
    Ok(())
}

/// Full-range BT.601 luma, `(77 R + 150 G + 29 B + 128) >> 8`.
pub fn luma_from_rgb(r: u8, g: u8, b: u8) -> u8 {
    ((77 * u32::from(r) + 150 * u32::from(g) + 29 * u32::from(b) + 128) >> 8) as u8
}

/// Converts packed RGB24 samples to a luma plane.
pub fn luma_from_rgb24(rgb: &[u8]) -> Result<Vec<u8>> {
    if !rgb.len().is_multiple_of(3) {
        return Err(CodecError::InvalidInput(format!(
            "{} bytes is not whole RGB24 pixels",
            rgb.len()
        )));
    }
    Ok(rgb
        .chunks_exact(3)
        .map(|p| luma_from_rgb(p[0], p[1], p[2]))
        .collect())
}

/// Serialises every frame as a binary (P5) PGM image, back to back.
pub fn to_pgm_sequence(seq: &VideoSequence) -> Vec<u8> {
    let mut out = Vec::new();
    for frame in seq.frames() {
        out.extend_from_slice(format!("P5\n{} {}\n255\n", frame.width(), frame.height()).as_bytes());
        out.extend_from_slice(frame.plane());
    }
    out
}

/// Parses one or more concatenated 8-bit P5 images of equal size.
pub fn from_pgm_sequence(bytes: &[u8]) -> Result<VideoSequence> {
    let mut pos = 0;
    let mut frames = Vec::new();
    let mut dims = None;
    loop {
        skip_space(bytes, &mut pos);
        if pos >= bytes.len() {
            break;
        }
        if bytes.get(pos..pos + 2) != Some(b"P5") {
            return Err(CodecError::UnsupportedFormat(format!(
                "expected P5 magic at byte {pos}"
            )));
        }
        pos += 2;
        let width = pgm_number(bytes, &mut pos)?;
        let height = pgm_number(bytes, &mut pos)?;
        let maxval = pgm_number(bytes, &mut pos)?;
        if maxval != 255 {
            return Err(CodecError::UnsupportedFormat(format!(
                "only 8-bit PGM is supported, maxval {maxval}"
            )));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let len = width * height;
        let raster = bytes.get(pos..pos + len).ok_or_else(|| {
            CodecError::CorruptData(format!("PGM frame {} truncated", frames.len()))
        })?;
        pos += len;
        match dims {
            None => dims = Some((width, height)),
            Some(d) if d != (width, height) => {
                return Err(CodecError::InvalidInput(format!(
                    "PGM frame {} is {width}x{height}, first frame is {}x{}",
                    frames.len(),
                    d.0,
                    d.1
                )))
            }
            Some(_) => {}
        }
        frames.push(Frame::new(width, height, raster.to_vec(), frames.len())?);
    }
    let (w, h) = dims.ok_or_else(|| CodecError::InvalidInput("no PGM frames found".into()))?;
    VideoSequence::new(w, h, frames)
}

pub fn read_pgm_sequence(path: &Path) -> Result<VideoSequence> {
    from_pgm_sequence(&fs::read(path)?)
}

fn skip_space(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

fn pgm_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    skip_space(bytes, pos);
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CodecError::CorruptData(format!("bad PGM header number at byte {start}")))
}
