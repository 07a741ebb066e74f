//! Two-channel biorthogonal filter banks.

use super::{CodecError, Result};

/// Integer taps of the 3-tap analysis low-pass filter.
pub const CDF93_LOW_TAPS: [f64; 3] = [32.0, 64.0, 32.0];
/// Integer taps of the 9-tap analysis high-pass filter.
pub const CDF93_HIGH_TAPS: [f64; 9] = [3.0, 6.0, -16.0, -38.0, 90.0, -38.0, -16.0, 6.0, 3.0];

/// Common scale applied to both integer tap lists, `2^(-13/2)`.
pub fn cdf93_scale() -> f64 {
    2f64.powf(-6.5)
}

/// Lifting factorisation of a bank whose low-pass is the 3-tap spline.
///
/// Forward direction, on even samples `x_e` and odd samples `x_o`:
/// `s[k] = x[2k] + update * (x[2k-1] + x[2k+1])`, then
/// `d[k] = x[2k+1] + predict[0] * (s[k] + s[k+1]) + predict[1] * (s[k-1] + s[k+2])`,
/// and finally `approx = low_gain * s`, `detail = high_gain * d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftingSteps {
    pub update: f64,
    pub predict: [f64; 2],
    pub low_gain: f64,
    pub high_gain: f64,
}

impl LiftingSteps {
    pub fn cdf93() -> Self {
        Self {
            update: 0.5,
            predict: [-19.0 / 64.0, 3.0 / 64.0],
            low_gain: std::f64::consts::FRAC_1_SQRT_2,
            high_gain: std::f64::consts::SQRT_2,
        }
    }
}

/// Analysis and synthesis taps, each odd-length and centred on its middle
/// element. The low-pass channel is sampled at even positions and the
/// high-pass channel at odd positions.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub analysis_low: Vec<f64>,
    pub analysis_high: Vec<f64>,
    pub synthesis_low: Vec<f64>,
    pub synthesis_high: Vec<f64>,
    lifting: Option<LiftingSteps>,
}

impl FilterBank {
    /// The 9/3 bank used by the codec, with its lifting factorisation.
    pub fn cdf93() -> Self {
        let scale = cdf93_scale();
        let analysis = Self {
            analysis_low: CDF93_LOW_TAPS.iter().map(|t| t * scale).collect(),
            analysis_high: CDF93_HIGH_TAPS.iter().map(|t| t * scale).collect(),
            synthesis_low: Vec::new(),
            synthesis_high: Vec::new(),
            lifting: Some(LiftingSteps::cdf93()),
        };
        derive_synthesis_filters(&analysis)
    }

    /// A bank built from analysis taps only; transforms run by direct
    /// convolution. Taps must be odd-length and symmetric.
    pub fn from_analysis(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        for (name, taps) in [("low", &low), ("high", &high)] {
            if taps.len() % 2 == 0 {
                return Err(CodecError::InvalidInput(format!(
                    "{name}-pass filter must have odd length, got {}",
                    taps.len()
                )));
            }
            let symmetric = taps
                .iter()
                .zip(taps.iter().rev())
                .all(|(a, b)| (a - b).abs() <= 1e-15 * a.abs().max(1.0));
            if !symmetric {
                return Err(CodecError::InvalidInput(format!(
                    "{name}-pass filter must be symmetric"
                )));
            }
        }
        let analysis = Self {
            analysis_low: low,
            analysis_high: high,
            synthesis_low: Vec::new(),
            synthesis_high: Vec::new(),
            lifting: None,
        };
        Ok(derive_synthesis_filters(&analysis))
    }

    pub fn lifting(&self) -> Option<&LiftingSteps> {
        self.lifting.as_ref()
    }

    /// The same taps with the lifting path disabled, forcing convolution.
    pub fn without_lifting(&self) -> Self {
        Self {
            lifting: None,
            ..self.clone()
        }
    }
}

/// Alternating-sign complement of the analysis pair:
/// `synthesis_low[n] = (-1)^n analysis_high[n]` and
/// `synthesis_high[n] = (-1)^(n+1) analysis_low[n]`, indices counted from
/// the first tap of each filter.
pub fn derive_synthesis_filters(analysis: &FilterBank) -> FilterBank {
    let alternate = |taps: &[f64], odd_sign: f64| -> Vec<f64> {
        taps.iter()
            .enumerate()
            .map(|(n, &t)| if n % 2 == 0 { t * -odd_sign } else { t * odd_sign })
            .collect()
    };
    FilterBank {
        analysis_low: analysis.analysis_low.clone(),
        analysis_high: analysis.analysis_high.clone(),
        synthesis_low: alternate(&analysis.analysis_high, -1.0),
        synthesis_high: alternate(&analysis.analysis_low, 1.0),
        lifting: analysis.lifting,
    }
}
