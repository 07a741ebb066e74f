//! One- and two-dimensional discrete wavelet transforms.
//!
//! Boundaries use whole-sample symmetric extension: `x[-i] = x[i]` and
//! `x[n-1+i] = x[n-1-i]`. Approximation coefficients sit on even sample
//! positions and detail coefficients on odd ones, so a length-`n` signal
//! splits into `ceil(n/2)` approximation and `floor(n/2)` detail values.
//!
//! Banks that carry a lifting factorisation are transformed in place by
//! lifting steps; any other bank falls back to direct convolution.

use super::filters::{FilterBank, LiftingSteps};
use super::{CodecError, Result};

/// Maps an index of the symmetrically extended signal back into `0..n`.
#[inline]
pub(crate) fn reflect(p: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let p = p.rem_euclid(period);
    if p < n as isize {
        p as usize
    } else {
        (period - p) as usize
    }
}

pub fn dwt1d_forward(signal: &[f64], bank: &FilterBank) -> Result<(Vec<f64>, Vec<f64>)> {
    if signal.len() < 2 {
        return Err(CodecError::InvalidInput(format!(
            "signal length {} is below the minimum of 2",
            signal.len()
        )));
    }
    Ok(match bank.lifting() {
        Some(steps) => lift_forward(signal, steps),
        None => convolve_forward(signal, bank),
    })
}

pub fn dwt1d_inverse(approx: &[f64], detail: &[f64], bank: &FilterBank) -> Result<Vec<f64>> {
    let consistent = approx.len() == detail.len() || approx.len() == detail.len() + 1;
    if !consistent || approx.len() + detail.len() < 2 {
        return Err(CodecError::InvalidInput(format!(
            "approximation length {} and detail length {} do not come from one split",
            approx.len(),
            detail.len()
        )));
    }
    Ok(match bank.lifting() {
        Some(steps) => lift_inverse(approx, detail, steps),
        None => convolve_inverse(approx, detail, bank),
    })
}

fn lift_forward(x: &[f64], steps: &LiftingSteps) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let at = |p: isize| x[reflect(p, n)];
    let mut s: Vec<f64> = (0..n.div_ceil(2))
        .map(|k| {
            let e = 2 * k as isize;
            x[2 * k] + steps.update * (at(e - 1) + at(e + 1))
        })
        .collect();
    let s_at = |k: isize| s[reflect(2 * k, n) / 2];
    let d: Vec<f64> = (0..n / 2)
        .map(|k| {
            let k = k as isize;
            x[2 * k as usize + 1]
                + steps.predict[0] * (s_at(k) + s_at(k + 1))
                + steps.predict[1] * (s_at(k - 1) + s_at(k + 2))
        })
        .map(|v| v * steps.high_gain)
        .collect();
    for v in &mut s {
        *v *= steps.low_gain;
    }
    (s, d)
}

fn lift_inverse(approx: &[f64], detail: &[f64], steps: &LiftingSteps) -> Vec<f64> {
    let n = approx.len() + detail.len();
    let s: Vec<f64> = approx.iter().map(|v| v / steps.low_gain).collect();
    let s_at = |k: isize| s[reflect(2 * k, n) / 2];
    let mut x = vec![0.0; n];
    for (k, dv) in detail.iter().enumerate() {
        let k = k as isize;
        x[2 * k as usize + 1] = dv / steps.high_gain
            - steps.predict[0] * (s_at(k) + s_at(k + 1))
            - steps.predict[1] * (s_at(k - 1) + s_at(k + 2));
    }
    for k in 0..s.len() {
        let e = 2 * k as isize;
        let left = x[reflect(e - 1, n)];
        let right = x[reflect(e + 1, n)];
        x[2 * k] = s[k] - steps.update * (left + right);
    }
    x
}

fn convolve_forward(x: &[f64], bank: &FilterBank) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let filter_at = |taps: &[f64], centre: isize| -> f64 {
        let half = (taps.len() / 2) as isize;
        taps.iter()
            .enumerate()
            .map(|(j, t)| t * x[reflect(centre + j as isize - half, n)])
            .sum()
    };
    let approx = (0..n.div_ceil(2))
        .map(|k| filter_at(&bank.analysis_low, 2 * k as isize))
        .collect();
    let detail = (0..n / 2)
        .map(|k| filter_at(&bank.analysis_high, 2 * k as isize + 1))
        .collect();
    (approx, detail)
}

fn convolve_inverse(approx: &[f64], detail: &[f64], bank: &FilterBank) -> Vec<f64> {
    let n = approx.len() + detail.len();
    let mut low = vec![0.0; n];
    let mut high = vec![0.0; n];
    for (k, v) in approx.iter().enumerate() {
        low[2 * k] = *v;
    }
    for (k, v) in detail.iter().enumerate() {
        high[2 * k + 1] = *v;
    }
    let apply = |taps: &[f64], band: &[f64], m: usize| -> f64 {
        let half = (taps.len() / 2) as isize;
        taps.iter()
            .enumerate()
            .map(|(j, t)| t * band[reflect(m as isize - (j as isize - half), n)])
            .sum()
    };
    (0..n)
        .map(|m| apply(&bank.synthesis_low, &low, m) + apply(&bank.synthesis_high, &high, m))
        .collect()
}

/// A rectangular, row-major array of values.
#[derive(Debug, Clone, PartialEq)]
pub struct Band<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy + Default> Band<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(CodecError::InvalidInput(format!(
                "band holds {} values, expected {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![T::default(); width * height],
        }
    }

    pub fn map<U, F: Fn(T) -> U>(&self, f: F) -> Band<U> {
        Band {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }
}

/// Detail subbands of one decomposition level.
///
/// `hl` is high-pass horizontally and low-pass vertically, `lh` the reverse.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelBands<T> {
    pub hl: Band<T>,
    pub lh: Band<T>,
    pub hh: Band<T>,
}

/// Multi-level 2-D decomposition. `levels[0]` is the finest level and `ll`
/// the approximation left after the deepest one.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid<T> {
    pub width: usize,
    pub height: usize,
    pub levels: Vec<LevelBands<T>>,
    pub ll: Band<T>,
}

pub type SubbandPyramid = Pyramid<f64>;

impl<T: Copy + Default> Pyramid<T> {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn coefficient_count(&self) -> usize {
        self.ll.data.len()
            + self
                .levels
                .iter()
                .map(|l| l.hl.data.len() + l.lh.data.len() + l.hh.data.len())
                .sum::<usize>()
    }

    pub fn map<U, F: Fn(T) -> U + Copy>(&self, f: F) -> Pyramid<U> {
        Pyramid {
            width: self.width,
            height: self.height,
            levels: self
                .levels
                .iter()
                .map(|l| LevelBands {
                    hl: l.hl.map(f),
                    lh: l.lh.map(f),
                    hh: l.hh.map(f),
                })
                .collect(),
            ll: self.ll.map(f),
        }
    }

    /// An all-zero pyramid with the layout `dwt2d_forward` produces.
    pub fn zeros(width: usize, height: usize, levels: usize) -> Result<Self> {
        check_depth(width, height, levels)?;
        let (mut w, mut h) = (width, height);
        let mut out = Vec::with_capacity(levels);
        for _ in 0..levels {
            let (lw, hw) = (w.div_ceil(2), w / 2);
            let (lh, hh) = (h.div_ceil(2), h / 2);
            out.push(LevelBands {
                hl: Band::zeros(hw, lh),
                lh: Band::zeros(lw, hh),
                hh: Band::zeros(hw, hh),
            });
            w = lw;
            h = lh;
        }
        Ok(Self {
            width,
            height,
            levels: out,
            ll: Band::zeros(w, h),
        })
    }

    /// Subbands in serialisation order: deepest LL, then for each level from
    /// deepest to finest its HL, LH and HH bands.
    pub fn bands(&self) -> impl Iterator<Item = &Band<T>> {
        std::iter::once(&self.ll).chain(
            self.levels
                .iter()
                .rev()
                .flat_map(|l| [&l.hl, &l.lh, &l.hh]),
        )
    }

    pub fn bands_mut(&mut self) -> impl Iterator<Item = &mut Band<T>> {
        std::iter::once(&mut self.ll).chain(
            self.levels
                .iter_mut()
                .rev()
                .flat_map(|l| [&mut l.hl, &mut l.lh, &mut l.hh]),
        )
    }
}

/// Deepest decomposition a `width` x `height` plane supports: each level
/// needs both current dimensions to be at least 2.
pub fn max_levels(width: usize, height: usize) -> usize {
    let (mut w, mut h, mut levels) = (width, height, 0);
    while w >= 2 && h >= 2 {
        w = w.div_ceil(2);
        h = h.div_ceil(2);
        levels += 1;
    }
    levels
}

fn check_depth(width: usize, height: usize, levels: usize) -> Result<()> {
    let max = max_levels(width, height);
    if levels == 0 || levels > max {
        return Err(CodecError::InvalidInput(format!(
            "{levels} decomposition levels requested for a {width}x{height} plane; \
             maximum feasible depth is {max}"
        )));
    }
    Ok(())
}

pub fn dwt2d_forward(plane: &Band<f64>, levels: usize, bank: &FilterBank) -> Result<SubbandPyramid> {
    check_depth(plane.width, plane.height, levels)?;
    let mut current = plane.clone();
    let mut out = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (ll, bands) = split_level(&current, bank)?;
        out.push(bands);
        current = ll;
    }
    Ok(Pyramid {
        width: plane.width,
        height: plane.height,
        levels: out,
        ll: current,
    })
}

pub fn dwt2d_inverse(pyramid: &SubbandPyramid, bank: &FilterBank) -> Result<Band<f64>> {
    validate_layout(pyramid)?;
    let mut current = pyramid.ll.clone();
    for bands in pyramid.levels.iter().rev() {
        current = merge_level(&current, bands, bank)?;
    }
    Ok(current)
}

fn validate_layout<T: Copy + Default>(pyramid: &Pyramid<T>) -> Result<()> {
    let corrupt = |what: String| CodecError::CorruptData(format!("malformed pyramid: {what}"));
    if pyramid.levels.is_empty() {
        return Err(corrupt("no decomposition levels".into()));
    }
    let (mut w, mut h) = (pyramid.width, pyramid.height);
    for (i, l) in pyramid.levels.iter().enumerate() {
        if w < 2 || h < 2 {
            return Err(corrupt(format!("level {i} applied to a {w}x{h} band")));
        }
        let (lw, hw, lh, hh) = (w.div_ceil(2), w / 2, h.div_ceil(2), h / 2);
        let shapes = [
            ("HL", &l.hl, hw, lh),
            ("LH", &l.lh, lw, hh),
            ("HH", &l.hh, hw, hh),
        ];
        for (name, band, bw, bh) in shapes {
            if band.width != bw || band.height != bh || band.data.len() != bw * bh {
                return Err(corrupt(format!(
                    "level {i} {name} is {}x{} with {} values, expected {bw}x{bh}",
                    band.width,
                    band.height,
                    band.data.len()
                )));
            }
        }
        w = lw;
        h = lh;
    }
    let ll = &pyramid.ll;
    if ll.width != w || ll.height != h || ll.data.len() != w * h {
        return Err(corrupt(format!(
            "LL is {}x{}, expected {w}x{h}",
            ll.width, ll.height
        )));
    }
    Ok(())
}

fn split_level(plane: &Band<f64>, bank: &FilterBank) -> Result<(Band<f64>, LevelBands<f64>)> {
    let (w, h) = (plane.width, plane.height);
    let (lw, lh) = (w.div_ceil(2), h.div_ceil(2));

    // rows: [approx | detail]
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let (a, d) = dwt1d_forward(&plane.data[y * w..(y + 1) * w], bank)?;
        rows[y * w..y * w + lw].copy_from_slice(&a);
        rows[y * w + lw..(y + 1) * w].copy_from_slice(&d);
    }

    // columns: approx on top, detail below
    let mut cols = vec![0.0; w * h];
    let mut column = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            column[y] = rows[y * w + x];
        }
        let (a, d) = dwt1d_forward(&column, bank)?;
        for (y, v) in a.into_iter().chain(d).enumerate() {
            cols[y * w + x] = v;
        }
    }

    let take = |x0: usize, y0: usize, bw: usize, bh: usize| -> Band<f64> {
        let mut data = Vec::with_capacity(bw * bh);
        for y in y0..y0 + bh {
            data.extend_from_slice(&cols[y * w + x0..y * w + x0 + bw]);
        }
        Band {
            width: bw,
            height: bh,
            data,
        }
    };
    let ll = take(0, 0, lw, lh);
    let bands = LevelBands {
        hl: take(lw, 0, w - lw, lh),
        lh: take(0, lh, lw, h - lh),
        hh: take(lw, lh, w - lw, h - lh),
    };
    Ok((ll, bands))
}

fn merge_level(ll: &Band<f64>, bands: &LevelBands<f64>, bank: &FilterBank) -> Result<Band<f64>> {
    let (lw, lh) = (ll.width, ll.height);
    let w = lw + bands.hl.width;
    let h = lh + bands.lh.height;

    let mut cols = vec![0.0; w * h];
    let mut put = |band: &Band<f64>, x0: usize, y0: usize| {
        for y in 0..band.height {
            let row = &band.data[y * band.width..(y + 1) * band.width];
            cols[(y0 + y) * w + x0..(y0 + y) * w + x0 + band.width].copy_from_slice(row);
        }
    };
    put(ll, 0, 0);
    put(&bands.hl, lw, 0);
    put(&bands.lh, 0, lh);
    put(&bands.hh, lw, lh);

    let mut rows = vec![0.0; w * h];
    let mut approx = vec![0.0; lh];
    let mut detail = vec![0.0; h - lh];
    for x in 0..w {
        for y in 0..lh {
            approx[y] = cols[y * w + x];
        }
        for y in lh..h {
            detail[y - lh] = cols[y * w + x];
        }
        let column = dwt1d_inverse(&approx, &detail, bank)?;
        for (y, v) in column.into_iter().enumerate() {
            rows[y * w + x] = v;
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let row = &rows[y * w..(y + 1) * w];
        let line = dwt1d_inverse(&row[..lw], &row[lw..], bank)?;
        out[y * w..(y + 1) * w].copy_from_slice(&line);
    }
    Ok(Band {
        width: w,
        height: h,
        data: out,
    })
}
