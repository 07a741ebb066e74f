//! Base-frame / residual decomposition along the time axis.

use super::{CodecError, Frame, Result, VideoSequence};

/// A base frame followed by the signed differences of the frames after it.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGroup {
    pub base: Frame,
    /// `frame(base.index + k + 1) - base`, elementwise, in `[-255, 255]`.
    pub residuals: Vec<Vec<i16>>,
    pub gop_size: usize,
}

impl TemporalGroup {
    pub fn frame_count(&self) -> usize {
        1 + self.residuals.len()
    }
}

pub fn split_temporal(seq: &VideoSequence, gop_size: usize) -> Result<Vec<TemporalGroup>> {
    if seq.is_empty() {
        return Err(CodecError::InvalidInput("cannot split an empty sequence".into()));
    }
    if gop_size == 0 {
        return Err(CodecError::InvalidInput("gop_size must be at least 1".into()));
    }
    let groups = seq
        .frames()
        .chunks(gop_size)
        .map(|chunk| {
            let base = chunk[0].clone();
            let residuals = chunk[1..]
                .iter()
                .map(|f| {
                    f.plane()
                        .iter()
                        .zip(base.plane())
                        .map(|(&v, &b)| i16::from(v) - i16::from(b))
                        .collect()
                })
                .collect();
            TemporalGroup {
                base,
                residuals,
                gop_size,
            }
        })
        .collect();
    Ok(groups)
}

pub fn merge_temporal(groups: &[TemporalGroup]) -> Result<VideoSequence> {
    let first = groups
        .first()
        .ok_or_else(|| CodecError::InvalidInput("no temporal groups to merge".into()))?;
    let (width, height) = (first.base.width(), first.base.height());
    let mut frames = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        if group.base.width() != width || group.base.height() != height {
            return Err(CodecError::InvalidInput(format!(
                "group {g} base is {}x{}, expected {width}x{height}",
                group.base.width(),
                group.base.height()
            )));
        }
        frames.push(group.base.clone());
        for (k, residual) in group.residuals.iter().enumerate() {
            if residual.len() != width * height {
                return Err(CodecError::CorruptData(format!(
                    "group {g} residual {k} has {} samples",
                    residual.len()
                )));
            }
            let mut plane = Vec::with_capacity(residual.len());
            for (&r, &b) in residual.iter().zip(group.base.plane()) {
                if !(-255..=255).contains(&r) {
                    return Err(CodecError::CorruptData(format!(
                        "residual value {r} outside [-255, 255] in group {g}"
                    )));
                }
                let v = i16::from(b) + r;
                let v = u8::try_from(v).map_err(|_| {
                    CodecError::CorruptData(format!(
                        "reconstructed sample {v} outside [0, 255] in group {g}"
                    ))
                })?;
                plane.push(v);
            }
            frames.push(Frame::new(width, height, plane, 0)?);
        }
    }
    VideoSequence::new(width, height, frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(frames: usize, w: usize, h: usize, seed: u64) -> VideoSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = (0..frames)
            .map(|i| Frame::new(w, h, (0..w * h).map(|_| rng.gen()).collect(), i).unwrap())
            .collect();
        VideoSequence::new(w, h, frames).unwrap()
    }

    #[test]
    fn identical_frames_give_zero_residual() {
        let a = Frame::filled(4, 4, 77, 0).unwrap();
        let seq = VideoSequence::new(4, 4, vec![a.clone(), a]).unwrap();
        let groups = split_temporal(&seq, 2).unwrap();
        assert_eq!(groups.len(), 1);
        assert!(groups[0].residuals[0].iter().all(|&r| r == 0));
    }

    #[test]
    fn constant_offset_gives_unit_residual() {
        let a = Frame::new(3, 3, (0..9).collect(), 0).unwrap();
        let b = Frame::new(3, 3, (1..10).collect(), 1).unwrap();
        let seq = VideoSequence::new(3, 3, vec![a, b]).unwrap();
        let groups = split_temporal(&seq, 2).unwrap();
        assert!(groups[0].residuals[0].iter().all(|&r| r == 1));
    }

    #[test]
    fn random_split_matches_per_pixel_subtraction() {
        let seq = random_seq(3, 8, 8, 11);
        let groups = split_temporal(&seq, 2).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].base, seq.frames()[0]);
        assert_eq!(groups[1].base, seq.frames()[2]);
        assert!(groups[1].residuals.is_empty());
        for y in 0..8 {
            for x in 0..8 {
                let expected =
                    seq.frames()[1].sample(x, y) as i32 - seq.frames()[0].sample(x, y) as i32;
                assert_eq!(groups[0].residuals[0][y * 8 + x] as i32, expected);
            }
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let seq = VideoSequence::new(2, 2, vec![]).unwrap();
        assert!(matches!(split_temporal(&seq, 2), Err(CodecError::InvalidInput(_))));
        let seq = random_seq(1, 2, 2, 0);
        assert!(split_temporal(&seq, 0).is_err());
    }

    #[test]
    fn zero_residuals_replicate_base() {
        let base = Frame::filled(2, 2, 9, 0).unwrap();
        let group = TemporalGroup {
            base: base.clone(),
            residuals: vec![vec![0; 4]; 2],
            gop_size: 3,
        };
        let seq = merge_temporal(&[group]).unwrap();
        assert_eq!(seq.len(), 3);
        assert!(seq.frames().iter().all(|f| f.plane() == base.plane()));
    }

    #[test]
    fn round_trips() {
        let seq = random_seq(4, 8, 8, 5);
        assert_eq!(merge_temporal(&split_temporal(&seq, 2).unwrap()).unwrap(), seq);

        let single = random_seq(1, 8, 8, 6);
        let groups = split_temporal(&single, 2).unwrap();
        assert_eq!(merge_temporal(&groups).unwrap(), single);
    }

    #[test]
    fn out_of_range_residual_is_corrupt() {
        let group = TemporalGroup {
            base: Frame::filled(1, 2, 0, 0).unwrap(),
            residuals: vec![vec![256, 0]],
            gop_size: 2,
        };
        assert!(matches!(merge_temporal(&[group]), Err(CodecError::CorruptData(_))));
        let group = TemporalGroup {
            base: Frame::filled(1, 2, 200, 0).unwrap(),
            residuals: vec![vec![100, 0]],
            gop_size: 2,
        };
        assert!(matches!(merge_temporal(&[group]), Err(CodecError::CorruptData(_))));
    }

    proptest::proptest! {
        #[test]
        fn merge_inverts_split(frames in 1usize..7, w in 1usize..9, h in 1usize..9, gop in 1usize..5, seed: u64) {
            let seq = random_seq(frames, w, h, seed);
            let groups = split_temporal(&seq, gop).unwrap();
            proptest::prop_assert_eq!(merge_temporal(&groups).unwrap(), seq);
        }
    }
}
