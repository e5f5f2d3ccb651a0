//! Shadow-border weight maps.
//!
//! The mask is box-filtered, pixels in the smeared transition band become the
//! border set, each border pixel gets a local contrast from four directional
//! half-window differences, and Gaussian contributions centered on the mean
//! border value are accumulated over square neighborhoods whose size grows
//! with contrast. The sum is scaled so its maximum is [`WEIGHT_CAP`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePlane;
use crate::shadow::ShadowMask;

pub const WEIGHT_CAP: f64 = 10.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContrastSource {
    /// Contrast from the image luminance.
    #[default]
    Luminance,
    /// Contrast from the smoothed mask itself.
    Mask,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BorderParams {
    pub window: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub sigma_max: f64,
    pub r_max: usize,
    pub contrast_source: ContrastSource,
}

impl Default for BorderParams {
    fn default() -> Self {
        Self {
            window: 21,
            tau1: 0.02,
            tau2: 0.98,
            sigma_max: 0.25,
            r_max: 10,
            contrast_source: ContrastSource::Luminance,
        }
    }
}

impl BorderParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Parameter(format!("window must be odd and >= 3, got {}", self.window)));
        }
        if !(0.0 < self.tau1 && self.tau1 < self.tau2 && self.tau2 < 1.0) {
            return Err(Error::Parameter(format!(
                "thresholds must satisfy 0 < tau1 < tau2 < 1, got {} and {}",
                self.tau1, self.tau2
            )));
        }
        if !(self.sigma_max > 0.0 && self.sigma_max.is_finite()) {
            return Err(Error::Parameter(format!("sigma_max must be > 0, got {}", self.sigma_max)));
        }
        if self.r_max == 0 {
            return Err(Error::Parameter("r_max must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }
}

/// Box-filtered mask, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedMask {
    pub plane: ImagePlane,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BorderSet {
    pub pixels: Vec<(usize, usize)>,
    /// Local contrast per pixel; empty until [`local_contrast`] runs.
    pub contrast: Vec<f64>,
    pub t_max: f64,
}

impl BorderSet {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Per-pixel border weights in `[0, WEIGHT_CAP]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    pub plane: ImagePlane,
}

impl WeightMap {
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Ok(Self {
            plane: ImagePlane::zeros(width, height)?,
        })
    }

    /// Constant weights, mostly useful for tests and ablations.
    pub fn uniform(width: usize, height: usize, value: f64) -> Result<Self> {
        Ok(Self {
            plane: ImagePlane::filled(width, height, value)?,
        })
    }

    pub fn plane(&self) -> &ImagePlane {
        &self.plane
    }
}

/// Sum over a sliding window along rows, with replicated edges.
fn window_sums_rows(src: &[f64], width: usize, height: usize, half: usize) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    out.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        let line = &src[y * width..(y + 1) * width];
        for (x, o) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in -(half as isize)..=half as isize {
                let xi = (x as isize + k).clamp(0, width as isize - 1) as usize;
                s += line[xi];
            }
            *o = s;
        }
    });
    out
}

fn transpose(src: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = src[y * width + x];
        }
    }
    out
}

/// Separable `window × window` mean filter with replicate padding.
pub fn smooth_mask(mask: &ShadowMask, params: &BorderParams) -> Result<SmoothedMask> {
    params.validate()?;
    let (w, h) = (mask.width(), mask.height());
    if params.window > w || params.window > h {
        return Err(Error::Parameter(format!(
            "window {} exceeds image size {w}x{h}",
            params.window
        )));
    }
    let half = params.window / 2;
    let rows = window_sums_rows(mask.plane().data(), w, h, half);
    let cols = window_sums_rows(&transpose(&rows, w, h), h, w, half);
    let area = (params.window * params.window) as f64;
    let data = transpose(&cols, h, w).into_iter().map(|s| s / area).collect();
    Ok(SmoothedMask {
        plane: ImagePlane::new(w, h, data)?,
    })
}

/// Covered pixels with `tau1 < c < tau2`, in row-major order.
pub fn find_border(c: &SmoothedMask, coverage: &ImagePlane, params: &BorderParams) -> Result<BorderSet> {
    params.validate()?;
    c.plane.check_dims(coverage, "smoothed mask/coverage dimension mismatch")?;
    let w = c.plane.width();
    let pixels = c
        .plane
        .data()
        .iter()
        .zip(coverage.data())
        .enumerate()
        .filter(|(_, (&v, &cov))| cov == 1.0 && params.tau1 < v && v < params.tau2)
        .map(|(i, _)| (i % w, i / w))
        .collect();
    Ok(BorderSet {
        pixels,
        contrast: Vec::new(),
        t_max: 0.0,
    })
}

const DIRECTIONS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];

/// Sum of the four directional half-window mean differences at `(x, y)`.
pub fn contrast_at(plane: &ImagePlane, x: usize, y: usize, half: usize) -> f64 {
    let (x, y) = (x as isize, y as isize);
    let n = half as f64;
    DIRECTIONS
        .iter()
        .map(|&(dx, dy)| {
            let mut fwd = 0.0;
            let mut bwd = 0.0;
            for k in 1..=half as isize {
                fwd += plane.get_clamped(x + k * dx, y + k * dy);
                bwd += plane.get_clamped(x - k * dx, y - k * dy);
            }
            (fwd / n - bwd / n).abs()
        })
        .sum()
}

/// Fills `border.contrast` and `border.t_max` from `source`.
pub fn local_contrast(source: &ImagePlane, mut border: BorderSet, params: &BorderParams) -> Result<BorderSet> {
    params.validate()?;
    if let Some(&(x, y)) = border.pixels.iter().find(|&&(x, y)| x >= source.width() || y >= source.height()) {
        return Err(Error::Structural(format!("border pixel ({x}, {y}) outside the contrast image")));
    }
    let half = params.window / 2;
    border.contrast = border
        .pixels
        .par_iter()
        .map(|&(x, y)| contrast_at(source, x, y, half))
        .collect();
    border.t_max = border.contrast.iter().copied().fold(0.0, f64::max);
    Ok(border)
}

/// Accumulates Gaussian contributions of every border pixel and scales the
/// result so its maximum is [`WEIGHT_CAP`].
///
/// Border pixels with zero contrast contribute nothing. Each output pixel
/// gathers its contributions in row-major border order, so the result does
/// not depend on the thread count.
pub fn accumulate_weights(
    c: &SmoothedMask,
    coverage: &ImagePlane,
    border: &BorderSet,
    params: &BorderParams,
) -> Result<WeightMap> {
    params.validate()?;
    c.plane.check_dims(coverage, "smoothed mask/coverage dimension mismatch")?;
    if border.contrast.len() != border.pixels.len() {
        return Err(Error::Contract("border contrast has not been computed".into()));
    }
    let (w, h) = (c.plane.width(), c.plane.height());
    if border.is_empty() || !(border.t_max > 0.0) {
        return WeightMap::zeros(w, h);
    }

    let mu = border.pixels.iter().map(|&(x, y)| c.plane.get(x, y)).sum::<f64>() / border.len() as f64;
    let norm = 1.0 / (params.sigma_max * (2.0 * std::f64::consts::PI).sqrt());

    // Per-pixel index into the border set, or usize::MAX.
    let mut index = vec![usize::MAX; w * h];
    for (i, &(x, y)) in border.pixels.iter().enumerate() {
        index[y * w + x] = i;
    }
    struct Source {
        radius: usize,
        two_sigma_sq: f64,
    }
    let sources: Vec<Option<Source>> = border
        .contrast
        .iter()
        .map(|&t| {
            if t <= 0.0 {
                return None;
            }
            let s = t / border.t_max;
            let sigma = s * params.sigma_max;
            Some(Source {
                radius: ((s * params.r_max as f64).round() as usize).max(1),
                two_sigma_sq: 2.0 * sigma * sigma,
            })
        })
        .collect();

    let r = params.r_max;
    let mut data = vec![0.0; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            if coverage.get(x, y) != 1.0 {
                continue;
            }
            let d = c.plane.get(x, y) - mu;
            let dd = d * d;
            let mut acc = 0.0;
            for v in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for u in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    let i = index[v * w + u];
                    if i == usize::MAX {
                        continue;
                    }
                    let Some(src) = &sources[i] else { continue };
                    if u.abs_diff(x).max(v.abs_diff(y)) <= src.radius {
                        acc += norm * (-dd / src.two_sigma_sq).exp();
                    }
                }
            }
            *out = acc;
        }
    });

    let max = data.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut data {
            *v = *v / max * WEIGHT_CAP;
        }
    }
    Ok(WeightMap {
        plane: ImagePlane::new(w, h, data)?,
    })
}

/// Intermediate products of [`border_weights_detailed`].
#[derive(Debug, Clone)]
pub struct BorderAnalysis {
    pub smoothed: SmoothedMask,
    pub border: BorderSet,
    pub weights: WeightMap,
}

/// Full pipeline: smoothing, border band, contrast, accumulation.
pub fn border_weights(mask: &ShadowMask, luminance: &ImagePlane, params: &BorderParams) -> Result<WeightMap> {
    Ok(border_weights_detailed(mask, luminance, params)?.weights)
}

pub fn border_weights_detailed(mask: &ShadowMask, luminance: &ImagePlane, params: &BorderParams) -> Result<BorderAnalysis> {
    params.validate()?;
    luminance.check_dims(mask.plane(), "luminance/mask dimension mismatch")?;
    let smoothed = smooth_mask(mask, params)?;
    let border = find_border(&smoothed, mask.coverage(), params)?;
    let source = match params.contrast_source {
        ContrastSource::Luminance => luminance,
        ContrastSource::Mask => &smoothed.plane,
    };
    let border = local_contrast(source, border, params)?;
    let weights = accumulate_weights(&smoothed, mask.coverage(), &border, params)?;
    Ok(BorderAnalysis {
        smoothed,
        border,
        weights,
    })
}
