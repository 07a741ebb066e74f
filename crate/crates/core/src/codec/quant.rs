//! Uniform dead-zone scalar quantisation.

use super::dwt::Pyramid;
use super::{CodecError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantMode {
    /// Integer planes are coded as-is and the wavelet stage is skipped.
    Lossless,
    Lossy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerConfig {
    pub step: f32,
    pub mode: QuantMode,
}

impl QuantizerConfig {
    pub fn lossless() -> Self {
        Self {
            step: 1.0,
            mode: QuantMode::Lossless,
        }
    }

    pub fn lossy(step: f32) -> Result<Self> {
        let q = Self {
            step,
            mode: QuantMode::Lossy,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == QuantMode::Lossy && !(self.step.is_finite() && self.step > 0.0) {
            return Err(CodecError::InvalidInput(format!(
                "lossy quantizer step must be a positive finite number, got {}",
                self.step
            )));
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.mode == QuantMode::Lossless
    }
}

/// `sign(c) * floor(|c| / step)`; lossless mode rounds to the nearest integer,
/// which is the identity on integer-valued input.
pub fn quantize_coefficient(c: f64, q: &QuantizerConfig) -> i32 {
    match q.mode {
        QuantMode::Lossless => c.round() as i32,
        QuantMode::Lossy => {
            let k = (c.abs() / f64::from(q.step)).floor();
            (k.copysign(c)) as i32
        }
    }
}

/// Midpoint reconstruction: `sign(k) * (|k| + 0.5) * step`, zero stays zero.
pub fn dequantize_coefficient(k: i32, q: &QuantizerConfig) -> f64 {
    match q.mode {
        QuantMode::Lossless => f64::from(k),
        QuantMode::Lossy if k == 0 => 0.0,
        QuantMode::Lossy => {
            let mag = (f64::from(k.unsigned_abs()) + 0.5) * f64::from(q.step);
            mag.copysign(f64::from(k))
        }
    }
}

pub fn quantize(pyramid: &Pyramid<f64>, q: &QuantizerConfig) -> Pyramid<i32> {
    let q = *q;
    pyramid.map(move |c| quantize_coefficient(c, &q))
}

pub fn dequantize(pyramid: &Pyramid<i32>, q: &QuantizerConfig) -> Pyramid<f64> {
    let q = *q;
    pyramid.map(move |k| dequantize_coefficient(k, &q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_fixed() {
        for step in [0.5f32, 1.0, 7.0] {
            let q = QuantizerConfig::lossy(step).unwrap();
            assert_eq!(quantize_coefficient(0.0, &q), 0);
            assert_eq!(dequantize_coefficient(0, &q), 0.0);
        }
    }

    #[test]
    fn floor_arithmetic() {
        let q = QuantizerConfig::lossy(2.0).unwrap();
        assert_eq!(quantize_coefficient(7.9, &q), 3);
        assert_eq!(quantize_coefficient(-7.9, &q), -3);
        assert_eq!(quantize_coefficient(1.99, &q), 0);
    }

    #[test]
    fn midpoint_reconstruction() {
        let q = QuantizerConfig::lossy(2.0).unwrap();
        assert_eq!(dequantize_coefficient(3, &q), 7.0);
        assert_eq!(dequantize_coefficient(-3, &q), -7.0);
    }

    #[test]
    fn lossless_is_identity_on_integers() {
        let q = QuantizerConfig::lossless();
        for v in [-255, -1, 0, 1, 255] {
            assert_eq!(quantize_coefficient(f64::from(v), &q), v);
            assert_eq!(dequantize_coefficient(v, &q), f64::from(v));
        }
    }

    #[test]
    fn invalid_steps_rejected() {
        assert!(QuantizerConfig::lossy(0.0).is_err());
        assert!(QuantizerConfig::lossy(-1.0).is_err());
        assert!(QuantizerConfig::lossy(f32::NAN).is_err());
    }
}
