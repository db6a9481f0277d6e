//! Windowed correlation between real and rendered feature volumes, and the
//! multiscale concatenation that feeds the residual regressor.
//!
//! The correlation of a rendered volume `f_s` against a real volume `f_r`
//! stacks, for every spatial shift `v` with `|v|_inf <= (window-1)/2`, the
//! per-pixel channel inner products `f_s(x)^T f_r(x+v) / sqrt(d)`. Shifts
//! are enumerated row-major from `(-h, -h)` to `(h, h)`, so channel
//! `(vy+h)*window + (vx+h)` holds shift `(vy, vx)`. Reads outside the
//! volume contribute zero.
//!
//! [`corr_volume`] and the plain five-loop [`corr_volume_reference`]
//! accumulate every output in the same ascending-channel order and scale
//! once at the end, so they agree bitwise; only their memory access
//! patterns differ.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense `channels x height x width` feature tensor, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureVolume {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!(
                "feature volume dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        Ok(FeatureVolume {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        })
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {channels}x{height}x{width} volume",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature volume entry".into()));
        }
        let mut v = Self::zeros(channels, height, width)?;
        v.data = data;
        Ok(v)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.height * self.width..(c + 1) * self.height * self.width]
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }
}

/// Correlation output: one channel per spatial shift.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVolume {
    window: usize,
    volume: FeatureVolume,
}

impl CorrelationVolume {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn channels(&self) -> usize {
        self.window * self.window
    }

    pub fn height(&self) -> usize {
        self.volume.height()
    }

    pub fn width(&self) -> usize {
        self.volume.width()
    }

    /// Channel index of shift `(vy, vx)`.
    pub fn channel_of_shift(&self, vy: i64, vx: i64) -> usize {
        let h = (self.window as i64 - 1) / 2;
        ((vy + h) * self.window as i64 + (vx + h)) as usize
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f64 {
        self.volume.get(channel, y, x)
    }

    /// The underlying shift-channel feature volume.
    pub fn as_features(&self) -> &FeatureVolume {
        &self.volume
    }

    pub fn into_features(self) -> FeatureVolume {
        self.volume
    }
}

fn validate_corr_inputs(
    f_s: &FeatureVolume,
    f_r: &FeatureVolume,
    window: usize,
) -> Result<(usize, i64)> {
    if !f_s.same_shape(f_r) {
        return Err(Error::ShapeMismatch(format!(
            "rendered {}x{}x{} vs real {}x{}x{}",
            f_s.channels, f_s.height, f_s.width, f_r.channels, f_r.height, f_r.width
        )));
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidWindow(window as i64));
    }
    let max = 2 * f_s.height.min(f_s.width) - 1;
    if window > max {
        return Err(Error::InvalidWindow(window as i64));
    }
    Ok((window, (window as i64 - 1) / 2))
}

/// Windowed correlation, cache-friendly path.
///
/// For each shift the overlap rectangle is accumulated row by row over
/// contiguous slices, one input channel at a time.
pub fn corr_volume(
    f_s: &FeatureVolume,
    f_r: &FeatureVolume,
    window: usize,
) -> Result<CorrelationVolume> {
    let (window, half) = validate_corr_inputs(f_s, f_r, window)?;
    let (d, height, width) = (f_s.channels, f_s.height, f_s.width);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let plane = height * width;
    let mut out = vec![0.0f64; window * window * plane];

    // One parallel task per row of shifts: the `window` shifts sharing a
    // vertical offset read the same pair of input rows, so each task keeps
    // a small per-row accumulator hot while the inputs stream once.
    out.par_chunks_mut(window * plane)
        .enumerate()
        .for_each(|(group, chans)| {
            let vy = group as i64 - half;
            let y_lo = (-vy).max(0) as usize;
            let y_hi = ((height as i64 - vy).min(height as i64)).max(0) as usize;
            let mut acc = vec![0.0f64; window * width];
            for y in y_lo..y_hi {
                acc.fill(0.0);
                let ry = (y as i64 + vy) as usize;
                for c in 0..d {
                    let s_row = &f_s.channel(c)[y * width..(y + 1) * width];
                    let r_row = &f_r.channel(c)[ry * width..(ry + 1) * width];
                    for (slot, a_row) in acc.chunks_mut(width).enumerate() {
                        let vx = slot as i64 - half;
                        let x_lo = (-vx).max(0) as usize;
                        let x_hi = ((width as i64 - vx).min(width as i64)).max(0) as usize;
                        if x_lo >= x_hi {
                            continue;
                        }
                        let rx = (x_lo as i64 + vx) as usize;
                        let len = x_hi - x_lo;
                        let a = &mut a_row[x_lo..x_hi];
                        let s = &s_row[x_lo..x_hi];
                        let r = &r_row[rx..rx + len];
                        for i in 0..len {
                            a[i] += s[i] * r[i];
                        }
                    }
                }
                for (slot, a_row) in acc.chunks(width).enumerate() {
                    let o_row =
                        &mut chans[slot * plane + y * width..slot * plane + (y + 1) * width];
                    for (o, a) in o_row.iter_mut().zip(a_row) {
                        *o = a * inv_sqrt_d;
                    }
                }
            }
        });

    Ok(CorrelationVolume {
        window,
        volume: FeatureVolume {
            channels: window * window,
            height,
            width,
            data: out,
        },
    })
}

/// Windowed correlation, plain five-nested-loop reference.
pub fn corr_volume_reference(
    f_s: &FeatureVolume,
    f_r: &FeatureVolume,
    window: usize,
) -> Result<CorrelationVolume> {
    let (window, half) = validate_corr_inputs(f_s, f_r, window)?;
    let (d, height, width) = (f_s.channels, f_s.height, f_s.width);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let mut out = FeatureVolume::zeros(window * window, height, width)?;
    for vy in -half..=half {
        for vx in -half..=half {
            let ci = ((vy + half) * window as i64 + (vx + half)) as usize;
            for y in 0..height {
                for x in 0..width {
                    let ry = y as i64 + vy;
                    let rx = x as i64 + vx;
                    if ry < 0 || ry >= height as i64 || rx < 0 || rx >= width as i64 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for c in 0..d {
                        acc += f_s.get(c, y, x) * f_r.get(c, ry as usize, rx as usize);
                    }
                    out.set(ci, y, x, acc * inv_sqrt_d);
                }
            }
        }
    }
    Ok(CorrelationVolume {
        window,
        volume: out,
    })
}

/// Per-pixel linear projection: `out(x) = proj * f(x)`.
pub fn project_features(f: &FeatureVolume, proj: &DMatrix<f64>) -> Result<FeatureVolume> {
    if proj.ncols() != f.channels {
        return Err(Error::ShapeMismatch(format!(
            "projection has {} columns, features have {} channels",
            proj.ncols(),
            f.channels
        )));
    }
    if proj.nrows() == 0 {
        return Err(Error::ShapeMismatch("projection has no rows".into()));
    }
    let mut out = FeatureVolume::zeros(proj.nrows(), f.height, f.width)?;
    let plane = f.height * f.width;
    for o in 0..proj.nrows() {
        let out_chan = &mut out.data[o * plane..(o + 1) * plane];
        for i in 0..f.channels {
            let w = proj[(o, i)];
            if w == 0.0 {
                continue;
            }
            for (acc, v) in out_chan.iter_mut().zip(f.channel(i)) {
                *acc += w * v;
            }
        }
    }
    Ok(out)
}

/// Stride-2 2x2 average pooling, the downsampling between pyramid scales.
pub fn average_pool_2x2(f: &FeatureVolume) -> Result<FeatureVolume> {
    if !f.height.is_multiple_of(2) || !f.width.is_multiple_of(2) {
        return Err(Error::ShapeMismatch(format!(
            "cannot pool odd resolution {}x{}",
            f.height, f.width
        )));
    }
    let (oh, ow) = (f.height / 2, f.width / 2);
    let mut out = FeatureVolume::zeros(f.channels, oh, ow)?;
    for c in 0..f.channels {
        for y in 0..oh {
            for x in 0..ow {
                let sum = f.get(c, 2 * y, 2 * x)
                    + f.get(c, 2 * y, 2 * x + 1)
                    + f.get(c, 2 * y + 1, 2 * x)
                    + f.get(c, 2 * y + 1, 2 * x + 1);
                out.set(c, y, x, sum * 0.25);
            }
        }
    }
    Ok(out)
}

/// Declared architecture of one pyramid scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleSpec {
    pub resolution: (usize, usize),
    pub input_channels: usize,
    pub output_channels: usize,
    pub stride: usize,
}

/// The fixed three-scale fusion table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PyramidSpec {
    pub scales: Vec<ScaleSpec>,
}

impl PyramidSpec {
    /// The standard three-scale fusion table: 64x64 186->128 stride 2,
    /// 32x32 377->256 stride 2, 16x16 505->256 stride 1.
    pub fn standard() -> Self {
        PyramidSpec {
            scales: vec![
                ScaleSpec {
                    resolution: (64, 64),
                    input_channels: 186,
                    output_channels: 128,
                    stride: 2,
                },
                ScaleSpec {
                    resolution: (32, 32),
                    input_channels: 377,
                    output_channels: 256,
                    stride: 2,
                },
                ScaleSpec {
                    resolution: (16, 16),
                    input_channels: 505,
                    output_channels: 256,
                    stride: 1,
                },
            ],
        }
    }
}

/// Inputs for one pyramid scale.
///
/// `projection` is the shared per-pixel linear map applied to both branches
/// before correlation (and, at coarser scales, the real-feature entry of
/// the concatenation). `fusion` stands in for the learned fusion
/// convolution: an arbitrary per-pixel linear map on the concatenation.
#[derive(Debug, Clone)]
pub struct PyramidScale {
    pub real: FeatureVolume,
    pub rendered: FeatureVolume,
    pub projection: Option<DMatrix<f64>>,
    pub fusion: Option<DMatrix<f64>>,
}

/// Channel accounting for one fused scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleReport {
    pub resolution: (usize, usize),
    pub concat_channels: usize,
    pub output_channels: usize,
}

/// Correlate and concatenate a feature pyramid.
///
/// At the finest scale the concatenation is
/// `[real features, correlation, visibility mask]`; every coarser scale
/// concatenates `[projected real features, correlation, pooled previous
/// fusion output]`. When `spec` is given, concatenated and fused channel
/// counts must match it exactly.
pub fn build_pyramid_concat(
    scales: &[PyramidScale],
    mask: &FeatureVolume,
    window: usize,
    spec: Option<&PyramidSpec>,
) -> Result<(Vec<FeatureVolume>, Vec<ScaleReport>)> {
    if scales.is_empty() {
        return Err(Error::EmptyInput("pyramid has no scales".into()));
    }
    if let Some(spec) = spec {
        if spec.scales.len() != scales.len() {
            return Err(Error::ShapeMismatch(format!(
                "spec has {} scales, inputs have {}",
                spec.scales.len(),
                scales.len()
            )));
        }
    }
    if mask.channels() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "mask must have 1 channel, has {}",
            mask.channels()
        )));
    }

    let mut outputs = Vec::with_capacity(scales.len());
    let mut reports = Vec::with_capacity(scales.len());
    let mut carry: Option<FeatureVolume> = None;

    for (s, scale) in scales.iter().enumerate() {
        let (h, w) = (scale.real.height(), scale.real.width());
        if !scale.real.same_shape(&scale.rendered) {
            return Err(Error::ShapeMismatch(format!(
                "scale {s}: real {}x{}x{} vs rendered {}x{}x{}",
                scale.real.channels(),
                h,
                w,
                scale.rendered.channels(),
                scale.rendered.height(),
                scale.rendered.width()
            )));
        }
        if s == 0 {
            if mask.height() != h || mask.width() != w {
                return Err(Error::ShapeMismatch(format!(
                    "mask {}x{} vs finest scale {h}x{w}",
                    mask.height(),
                    mask.width()
                )));
            }
        } else {
            let prev = &scales[s - 1].real;
            if prev.height() != 2 * h || prev.width() != 2 * w {
                return Err(Error::ShapeMismatch(format!(
                    "scale {s} resolution {h}x{w} must halve the previous {}x{}",
                    prev.height(),
                    prev.width()
                )));
            }
        }

        let (real_p, rendered_p) = match &scale.projection {
            Some(proj) => (
                project_features(&scale.real, proj)?,
                project_features(&scale.rendered, proj)?,
            ),
            None => (scale.real.clone(), scale.rendered.clone()),
        };
        let corr = corr_volume(&rendered_p, &real_p, window)?.into_features();

        let mut parts: Vec<&FeatureVolume> = Vec::new();
        let real_entry = if s == 0 { &scale.real } else { &real_p };
        parts.push(real_entry);
        parts.push(&corr);
        let pooled;
        if s == 0 {
            parts.push(mask);
        } else {
            pooled = carry.take().expect("carry produced by previous scale");
            parts.push(&pooled);
        }

        let concat = concat_channels(&parts)?;
        let fused = match &scale.fusion {
            Some(fusion) => project_features(&concat, fusion)?,
            None => concat.clone(),
        };

        if let Some(spec) = spec {
            let expected = spec.scales[s];
            if expected.input_channels != concat.channels() {
                return Err(Error::SpecViolation {
                    scale: s,
                    expected: expected.input_channels,
                    actual: concat.channels(),
                });
            }
            if expected.output_channels != fused.channels() {
                return Err(Error::SpecViolation {
                    scale: s,
                    expected: expected.output_channels,
                    actual: fused.channels(),
                });
            }
        }

        reports.push(ScaleReport {
            resolution: (h, w),
            concat_channels: concat.channels(),
            output_channels: fused.channels(),
        });
        if s + 1 < scales.len() {
            carry = Some(average_pool_2x2(&fused)?);
        }
        outputs.push(fused);
    }

    Ok((outputs, reports))
}

fn concat_channels(parts: &[&FeatureVolume]) -> Result<FeatureVolume> {
    let (h, w) = (parts[0].height(), parts[0].width());
    for p in parts {
        if p.height() != h || p.width() != w {
            return Err(Error::ShapeMismatch(format!(
                "concat parts disagree: {}x{} vs {h}x{w}",
                p.height(),
                p.width()
            )));
        }
    }
    let channels = parts.iter().map(|p| p.channels()).sum();
    let mut data = Vec::with_capacity(channels * h * w);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    FeatureVolume::from_vec(channels, h, w, data)
}
