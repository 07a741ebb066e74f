//! `.dwv` container layout.
//!
//! ```text
//! "DWV1" | u16 width | u16 height | u32 frames | u8 gop | u8 levels | u8 mode | f32 step
//! then per temporal group: u32 chunk length | DEFLATE chunk
//! ```
//! All integers little-endian. Samples are 8-bit luma.

use super::quant::{QuantMode, QuantizerConfig};
use super::{CodecError, Result};

pub const MAGIC: [u8; 4] = *b"DWV1";
pub const HEADER_LEN: usize = 4 + 2 + 2 + 4 + 1 + 1 + 1 + 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub width: u16,
    pub height: u16,
    pub frame_count: u32,
    pub gop_size: u8,
    pub levels: u8,
    pub quantizer: QuantizerConfig,
}

impl Header {
    /// Number of payload chunks the header implies.
    pub fn group_count(&self) -> usize {
        (self.frame_count as usize).div_ceil(self.gop_size.max(1) as usize)
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.frame_count.to_le_bytes());
        out.push(self.gop_size);
        out.push(self.levels);
        out.push(match self.quantizer.mode {
            QuantMode::Lossless => 0,
            QuantMode::Lossy => 1,
        });
        out.extend_from_slice(&self.quantizer.step.to_le_bytes());
    }

    fn read(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || bytes[..4] != MAGIC {
            return Err(CodecError::UnsupportedFormat(
                "missing DWV1 magic".to_string(),
            ));
        }
        if bytes.len() < HEADER_LEN {
            return Err(CodecError::CorruptData(format!(
                "header truncated at {} bytes",
                bytes.len()
            )));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let mode = match bytes[14] {
            0 => QuantMode::Lossless,
            1 => QuantMode::Lossy,
            m => {
                return Err(CodecError::UnsupportedFormat(format!(
                    "unknown quantizer mode {m}"
                )))
            }
        };
        let header = Self {
            width: u16_at(4),
            height: u16_at(6),
            frame_count: u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
            gop_size: bytes[12],
            levels: bytes[13],
            quantizer: QuantizerConfig {
                step: f32::from_le_bytes(bytes[15..19].try_into().unwrap()),
                mode,
            },
        };
        if header.width == 0 || header.height == 0 || header.frame_count == 0 || header.gop_size == 0 {
            return Err(CodecError::CorruptData(format!(
                "header describes an empty stream: {header:?}"
            )));
        }
        header
            .quantizer
            .validate()
            .map_err(|e| CodecError::CorruptData(e.to_string()))?;
        Ok(header)
    }
}

/// A parsed container: header plus one compressed chunk per temporal group.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitstream {
    pub header: Header,
    pub chunks: Vec<Vec<u8>>,
}

impl Bitstream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.header.write(&mut out);
        for chunk in &self.chunks {
            out.extend_from_slice(&(chunk.len() as u32).to_le_bytes());
            out.extend_from_slice(chunk);
        }
        out
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.chunks.iter().map(|c| 4 + c.len()).sum::<usize>()
    }

    /// Bytes after the header.
    pub fn payload_len(&self) -> usize {
        self.encoded_len() - HEADER_LEN
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = Header::read(bytes)?;
        let mut rest = &bytes[HEADER_LEN..];
        let mut chunks = Vec::with_capacity(header.group_count());
        for g in 0..header.group_count() {
            if rest.len() < 4 {
                return Err(CodecError::CorruptData(format!(
                    "payload truncated before chunk {g} length"
                )));
            }
            let len = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
            rest = &rest[4..];
            if rest.len() < len {
                return Err(CodecError::CorruptData(format!(
                    "chunk {g} declares {len} bytes, {} remain",
                    rest.len()
                )));
            }
            chunks.push(rest[..len].to_vec());
            rest = &rest[len..];
        }
        if !rest.is_empty() {
            return Err(CodecError::CorruptData(format!(
                "{} trailing bytes after the last chunk",
                rest.len()
            )));
        }
        Ok(Self { header, chunks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Bitstream {
        Bitstream {
            header: Header {
                width: 16,
                height: 8,
                frame_count: 3,
                gop_size: 2,
                levels: 2,
                quantizer: QuantizerConfig::lossy(4.0).unwrap(),
            },
            chunks: vec![vec![1, 2, 3], vec![4]],
        }
    }

    #[test]
    fn layout_is_bit_exact() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"DWV1");
        assert_eq!(&bytes[4..6], &[16, 0]);
        assert_eq!(&bytes[6..8], &[8, 0]);
        assert_eq!(&bytes[8..12], &[3, 0, 0, 0]);
        assert_eq!(&bytes[12..15], &[2, 2, 1]);
        assert_eq!(&bytes[15..19], &4.0f32.to_le_bytes());
        assert_eq!(&bytes[19..23], &[3, 0, 0, 0]);
        assert_eq!(bytes.len(), HEADER_LEN + 4 + 3 + 4 + 1);
        assert_eq!(Bitstream::from_bytes(&bytes).unwrap(), sample());
    }

    #[test]
    fn wrong_magic_is_unsupported() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(Bitstream::from_bytes(&bytes), Err(CodecError::UnsupportedFormat(_))));
    }

    #[test]
    fn truncation_and_trailing_bytes_are_corrupt() {
        let bytes = sample().to_bytes();
        for cut in [bytes.len() - 1, HEADER_LEN + 2, 10] {
            assert!(matches!(
                Bitstream::from_bytes(&bytes[..cut]),
                Err(CodecError::CorruptData(_))
            ));
        }
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(Bitstream::from_bytes(&longer), Err(CodecError::CorruptData(_))));
    }
}
