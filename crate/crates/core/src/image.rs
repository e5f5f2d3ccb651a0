//! Float raster containers, full-range BT.601 RGB/YUV conversion and the
//! power-law gamma used by the relighting pipeline.
//!
//! All arithmetic is `f64`. Quantization to 8 bits happens only in [`crate::io`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default encoding exponent: samples are raised to `1/2.2`.
pub const DEFAULT_GAMMA: f64 = 1.0 / 2.2;

/// BT.601 luma weights.
pub const KR: f64 = 0.299;
pub const KG: f64 = 0.587;
pub const KB: f64 = 0.114;

/// A single-channel, row-major float raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Structural(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Structural(format!(
                "plane data has {} samples, expected {}x{}={}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    /// Builds a plane by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Structural(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let mut data = vec![0.0; width * height];
        data.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
            for (x, v) in row.iter_mut().enumerate() {
                *v = f(x, y);
            }
        });
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with coordinates clamped to the image (replicate border).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    pub fn same_dims(&self, other: &ImagePlane) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_dims(&self, other: &ImagePlane, what: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::Structural(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    /// Applies `f` to every sample, in parallel over rows.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> ImagePlane {
        let mut data = self.data.clone();
        data.par_chunks_mut(self.width).for_each(|row| {
            for v in row {
                *v = f(*v);
            }
        });
        ImagePlane {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Combines two planes sample by sample.
    pub fn zip_map(&self, other: &ImagePlane, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<ImagePlane> {
        self.check_dims(other, "plane dimension mismatch")?;
        let mut data = vec![0.0; self.data.len()];
        data.par_chunks_mut(self.width)
            .zip(self.data.par_chunks(self.width))
            .zip(other.data.par_chunks(self.width))
            .for_each(|((out, a), b)| {
                for i in 0..out.len() {
                    out[i] = f(a[i], b[i]);
                }
            });
        Ok(ImagePlane {
            width: self.width,
            height: self.height,
            data,
        })
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColorSpace {
    Rgb,
    Yuv,
}

/// Three equally sized planes tagged with the color space they hold.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    space: ColorSpace,
    channels: [ImagePlane; 3],
}

impl ColorImage {
    pub fn new(space: ColorSpace, channels: [ImagePlane; 3]) -> Result<Self> {
        let [a, b, c] = &channels;
        a.check_dims(b, "color channel dimension mismatch")?;
        a.check_dims(c, "color channel dimension mismatch")?;
        Ok(Self { space, channels })
    }

    /// Builds an RGB image from interleaved `[r, g, b, r, g, b, ...]` samples.
    pub fn from_interleaved_rgb(width: usize, height: usize, rgb: &[f64]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::Structural(format!(
                "interleaved buffer has {} samples, expected {}",
                rgb.len(),
                width * height * 3
            )));
        }
        let plane = |c: usize| ImagePlane::new(width, height, rgb.iter().skip(c).step_by(3).copied().collect());
        Self::new(ColorSpace::Rgb, [plane(0)?, plane(1)?, plane(2)?])
    }

    /// A gray RGB image with every channel equal to `plane`.
    pub fn gray(plane: &ImagePlane) -> Self {
        Self {
            space: ColorSpace::Rgb,
            channels: [plane.clone(), plane.clone(), plane.clone()],
        }
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    pub fn channels(&self) -> &[ImagePlane; 3] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &ImagePlane {
        &self.channels[i]
    }

    pub fn into_channels(self) -> [ImagePlane; 3] {
        self.channels
    }

    pub fn to_interleaved(&self) -> Vec<f64> {
        let [a, b, c] = &self.channels;
        let mut out = Vec::with_capacity(a.len() * 3);
        for i in 0..a.len() {
            out.extend_from_slice(&[a.data()[i], b.data()[i], c.data()[i]]);
        }
        out
    }

    pub fn same_dims(&self, other: &ColorImage) -> bool {
        self.channels[0].same_dims(&other.channels[0])
    }

    fn expect_space(&self, space: ColorSpace) -> Result<()> {
        if self.space == space {
            Ok(())
        } else {
            Err(Error::Structural(format!(
                "expected a {space:?} image, got {:?}",
                self.space
            )))
        }
    }

    /// Per-pixel 3-to-3 transform producing a new image tagged `space`.
    fn convert(&self, space: ColorSpace, f: impl Fn([f64; 3]) -> [f64; 3] + Sync) -> ColorImage {
        let w = self.width();
        let [a, b, c] = &self.channels;
        let n = a.len();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let [o0, o1, o2] = &mut out;
        o0.par_chunks_mut(w)
            .zip(o1.par_chunks_mut(w))
            .zip(o2.par_chunks_mut(w))
            .enumerate()
            .for_each(|(y, ((r0, r1), r2))| {
                let off = y * w;
                for x in 0..w {
                    let [p, q, s] = f([a.data()[off + x], b.data()[off + x], c.data()[off + x]]);
                    r0[x] = p;
                    r1[x] = q;
                    r2[x] = s;
                }
            });
        let [o0, o1, o2] = out;
        let h = self.height();
        ColorImage {
            space,
            channels: [
                ImagePlane { width: w, height: h, data: o0 },
                ImagePlane { width: w, height: h, data: o1 },
                ImagePlane { width: w, height: h, data: o2 },
            ],
        }
    }
}

/// Full-range BT.601 forward transform of one pixel.
///
/// Chroma is written in difference form so that gray pixels get exactly zero U and V.
#[inline]
pub fn rgb_to_yuv_pixel([r, g, b]: [f64; 3]) -> [f64; 3] {
    let y = KR * r + KG * g + KB * b;
    let u = 0.5 * (KR * (b - r) + KG * (b - g)) / (1.0 - KB);
    let v = 0.5 * (KG * (r - g) + KB * (r - b)) / (1.0 - KR);
    [y, u, v]
}

/// Exact inverse of [`rgb_to_yuv_pixel`], without clamping.
#[inline]
pub fn yuv_to_rgb_pixel([y, u, v]: [f64; 3]) -> [f64; 3] {
    let r_y = 2.0 * (1.0 - KR) * v;
    let b_y = 2.0 * (1.0 - KB) * u;
    let g = y - (KR * r_y + KB * b_y) / KG;
    [y + r_y, g, y + b_y]
}

pub fn rgb_to_yuv(img: &ColorImage) -> Result<ColorImage> {
    img.expect_space(ColorSpace::Rgb)?;
    Ok(img.convert(ColorSpace::Yuv, rgb_to_yuv_pixel))
}

/// Converts back to RGB, clamping the result to `[0, 1]`.
pub fn yuv_to_rgb(img: &ColorImage) -> Result<ColorImage> {
    img.expect_space(ColorSpace::Yuv)?;
    Ok(img.convert(ColorSpace::Rgb, |p| yuv_to_rgb_pixel(p).map(|c| c.clamp(0.0, 1.0))))
}

/// The Y plane of an RGB image.
pub fn luminance(img: &ColorImage) -> Result<ImagePlane> {
    match img.space() {
        ColorSpace::Yuv => Ok(img.channel(0).clone()),
        ColorSpace::Rgb => {
            let [r, g, b] = img.channels();
            let rg = r.zip_map(g, |r, g| KR * r + KG * g)?;
            rg.zip_map(b, |rg, b| rg + KB * b)
        }
    }
}

fn power(plane: &ImagePlane, exponent: f64) -> Result<ImagePlane> {
    if let Some(i) = plane.data().iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::PixelDomain {
            x: i % plane.width(),
            y: i / plane.width(),
            msg: format!("gamma requires non-negative samples, got {}", plane.data()[i]),
        });
    }
    Ok(plane.map(|v| v.powf(exponent)))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("gamma must be positive and finite, got {gamma}")))
    }
}

/// `v -> v^gamma` (use [`DEFAULT_GAMMA`] for the usual `1/2.2`).
pub fn gamma_encode(plane: &ImagePlane, gamma: f64) -> Result<ImagePlane> {
    check_gamma(gamma)?;
    power(plane, gamma)
}

/// `v -> v^(1/gamma)`, the inverse of [`gamma_encode`].
pub fn gamma_decode(plane: &ImagePlane, gamma: f64) -> Result<ImagePlane> {
    check_gamma(gamma)?;
    power(plane, 1.0 / gamma)
}
