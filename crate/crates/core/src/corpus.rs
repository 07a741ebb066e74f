//! Deterministic synthetic sequences used by tests, benchmarks and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{Frame, VideoSequence};

fn build(frames: usize, w: usize, h: usize, f: impl Fn(usize, usize, usize) -> u8) -> VideoSequence {
    let frames = (0..frames)
        .map(|t| {
            let plane = (0..h)
                .flat_map(|y| (0..w).map(move |x| (x, y)))
                .map(|(x, y)| f(x, y, t))
                .collect();
            Frame::new(w, h, plane, t).expect("generated plane matches its dimensions")
        })
        .collect();
    VideoSequence::new(w, h, frames).expect("generated frames share dimensions")
}

pub fn constant(frames: usize, w: usize, h: usize, value: u8) -> VideoSequence {
    build(frames, w, h, |_, _, _| value)
}

/// Independent uniform samples in every frame.
pub fn noise(frames: usize, w: usize, h: usize, seed: u64) -> VideoSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<u8> = (0..frames * w * h).map(|_| rng.gen()).collect();
    build(frames, w, h, |x, y, t| samples[t * w * h + y * w + x])
}

/// A diagonal ramp that slides three samples per frame.
pub fn moving_gradient(frames: usize, w: usize, h: usize) -> VideoSequence {
    build(frames, w, h, |x, y, t| ((2 * x + y + 3 * t) % 256) as u8)
}

/// A fixed random texture that pans one sample right per frame.
pub fn noise_texture(frames: usize, w: usize, h: usize, seed: u64) -> VideoSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texture: Vec<u8> = (0..w * h).map(|_| rng.gen()).collect();
    build(frames, w, h, |x, y, t| texture[y * w + (x + w - t % w) % w])
}

/// Static smooth background with a shaded, lightly textured square
/// covering about a tenth of the frame that moves two samples right and one
/// down per frame.
pub fn high_redundancy(frames: usize, w: usize, h: usize, seed: u64) -> VideoSequence {
    let side = ((w * h) as f64 * 0.1).sqrt().round().max(1.0) as usize;
    let side = side.min(w).min(h);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patch: Vec<u8> = (0..side * side)
        .map(|i| {
            let (px, py) = (i % side, i / side);
            let shade = 160 + (px * 48 / side) as i32 - (py * 32 / side) as i32;
            (shade + rng.gen_range(-16..=16)).clamp(0, 255) as u8
        })
        .collect();
    build(frames, w, h, |x, y, t| {
        let ox = (2 * t) % (w - side + 1);
        let oy = t % (h - side + 1);
        if (ox..ox + side).contains(&x) && (oy..oy + side).contains(&y) {
            patch[(y - oy) * side + (x - ox)]
        } else {
            (40 + (x * 128) / w + (y * 64) / h) as u8
        }
    })
}

/// The lossy-monotonicity corpus: a moving gradient and a panning noise
/// texture, both 8 frames of 64x64.
pub fn acceptance_corpus() -> Vec<VideoSequence> {
    vec![moving_gradient(8, 64, 64), noise_texture(8, 64, 64, 0x5eed)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(noise(2, 8, 8, 3), noise(2, 8, 8, 3));
        assert_ne!(noise(2, 8, 8, 3), noise(2, 8, 8, 4));
        assert_eq!(high_redundancy(4, 64, 64, 1), high_redundancy(4, 64, 64, 1));
    }

    #[test]
    fn moving_region_is_about_ten_percent() {
        let seq = high_redundancy(2, 64, 64, 9);
        let changed = seq.frames()[0]
            .plane()
            .iter()
            .zip(seq.frames()[1].plane())
            .filter(|(a, b)| a != b)
            .count();
        // old and new patch positions together
        assert!(changed <= 2 * 4096 / 10 + 64, "{changed}");
        assert!(changed > 4096 / 20, "{changed}");
    }
}
