use super::{CodecError, Result};

/// One luma plane of a video, samples stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    plane: Vec<u8>,
    index: usize,
}

impl Frame {
    pub fn new(width: usize, height: usize, plane: Vec<u8>, index: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CodecError::InvalidInput(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if plane.len() != width * height {
            return Err(CodecError::InvalidInput(format!(
                "plane holds {} samples, expected {}x{}={}",
                plane.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            plane,
            index,
        })
    }

    /// A frame with every sample set to `value`.
    pub fn filled(width: usize, height: usize, value: u8, index: usize) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], index)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn plane(&self) -> &[u8] {
        &self.plane
    }

    pub fn into_plane(self) -> Vec<u8> {
        self.plane
    }

    pub fn sample(&self, x: usize, y: usize) -> u8 {
        self.plane[y * self.width + x]
    }

    pub(crate) fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }
}

/// An ordered run of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    width: usize,
    height: usize,
    fps: f32,
    frames: Vec<Frame>,
}

impl VideoSequence {
    pub const DEFAULT_FPS: f32 = 25.0;

    /// Builds a sequence, renumbering frames `0..n` in the order given.
    pub fn new(width: usize, height: usize, frames: Vec<Frame>) -> Result<Self> {
        Self::with_fps(width, height, Self::DEFAULT_FPS, frames)
    }

    pub fn with_fps(width: usize, height: usize, fps: f32, frames: Vec<Frame>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CodecError::InvalidInput(format!(
                "sequence dimensions must be positive, got {width}x{height}"
            )));
        }
        let mut renumbered = Vec::with_capacity(frames.len());
        for (i, frame) in frames.into_iter().enumerate() {
            if frame.width() != width || frame.height() != height {
                return Err(CodecError::InvalidInput(format!(
                    "frame {i} is {}x{}, sequence is {width}x{height}",
                    frame.width(),
                    frame.height()
                )));
            }
            renumbered.push(frame.with_index(i));
        }
        Ok(Self {
            width,
            height,
            fps,
            frames: renumbered,
        })
    }

    /// Splits headerless concatenated Y8 planes into frames.
    pub fn from_planes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let size = width * height;
        if size == 0 {
            return Err(CodecError::InvalidInput("zero-sized frame".into()));
        }
        if !bytes.len().is_multiple_of(size) {
            return Err(CodecError::InvalidInput(format!(
                "{} bytes is not a whole number of {width}x{height} planes",
                bytes.len()
            )));
        }
        let frames = bytes
            .chunks_exact(size)
            .enumerate()
            .map(|(i, chunk)| Frame::new(width, height, chunk.to_vec(), i))
            .collect::<Result<Vec<_>>>()?;
        Self::new(width, height, frames)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn fps(&self) -> f32 {
        self.fps
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Concatenated raw Y8 planes.
    pub fn to_planes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height * self.frames.len());
        for frame in &self.frames {
            out.extend_from_slice(frame.plane());
        }
        out
    }

    /// Size of the raw luma payload in bytes.
    pub fn raw_size(&self) -> usize {
        self.width * self.height * self.frames.len()
    }
}
