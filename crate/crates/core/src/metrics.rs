//! Losses and image metrics for evaluating relit images.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::border::WeightMap;
use crate::error::{Error, Result};
use crate::image::{luminance, ColorImage, ImagePlane};
use crate::lighting::{lighting_error, ShLighting};
use crate::relight::RatioImage;

fn log_ratios(r: &RatioImage) -> Result<Vec<f64>> {
    let p = r.plane();
    p.data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > 0.0 {
                Ok(v.log10())
            } else {
                Err(Error::PixelDomain {
                    x: i % p.width(),
                    y: i / p.width(),
                    msg: format!("ratio sample {v} is not positive"),
                })
            }
        })
        .collect()
}

fn log_diffs(pred: &RatioImage, truth: &RatioImage) -> Result<Vec<f64>> {
    pred.plane().check_dims(truth.plane(), "ratio dimension mismatch")?;
    let p = log_ratios(pred)?;
    let t = log_ratios(truth)?;
    Ok(p.iter().zip(&t).map(|(a, b)| (a - b).abs()).collect())
}

/// Mean absolute difference of base-10 log ratios.
pub fn l_ratio(pred: &RatioImage, truth: &RatioImage) -> Result<f64> {
    let d = log_diffs(pred, truth)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Number of strictly positive weights.
pub fn nonzero_count(w: &WeightMap) -> usize {
    w.plane().data().iter().filter(|&&v| v > 0.0).count()
}

/// Weighted L1 of log ratios divided by the number of nonzero weights;
/// 0 for an all-zero map.
pub fn l_border(pred: &RatioImage, truth: &RatioImage, w: &WeightMap) -> Result<f64> {
    let d = log_diffs(pred, truth)?;
    pred.plane().check_dims(w.plane(), "ratio/weight dimension mismatch")?;
    let n = nonzero_count(w);
    if n == 0 {
        return Ok(0.0);
    }
    let s: f64 = d.iter().zip(w.plane().data()).map(|(d, w)| w * d).sum();
    Ok(s / n as f64)
}

/// `l_ratio + l_border(w_s) + l_border(w_t)`.
pub fn l_wratio(pred: &RatioImage, truth: &RatioImage, w_s: &WeightMap, w_t: &WeightMap) -> Result<f64> {
    Ok(l_ratio(pred, truth)? + l_border(pred, truth, w_s)? + l_border(pred, truth, w_t)?)
}

/// Mean over pixels of `|∂x p − ∂x t| + |∂y p − ∂y t|`, using forward
/// differences that are zero on the last column and row.
pub fn l_gradient(pred: &RatioImage, truth: &RatioImage) -> Result<f64> {
    let (p, t) = (pred.plane(), truth.plane());
    p.check_dims(t, "ratio dimension mismatch")?;
    let (w, h) = (p.width(), p.height());
    let mut sum = 0.0;
    for y in 0..h {
        for x in 0..w {
            let (x1, y1) = ((x + 1).min(w - 1), (y + 1).min(h - 1));
            let dxp = p.get(x1, y) - p.get(x, y);
            let dxt = t.get(x1, y) - t.get(x, y);
            let dyp = p.get(x, y1) - p.get(x, y);
            let dyt = t.get(x, y1) - t.get(x, y);
            sum += (dxp - dxt).abs() + (dyp - dyt).abs();
        }
    }
    Ok(sum / (w * h) as f64)
}

fn check_color(a: &ColorImage, b: &ColorImage) -> Result<()> {
    if a.space() != b.space() || !a.same_dims(b) {
        return Err(Error::Structural("images differ in size or color space".into()));
    }
    Ok(())
}

fn samples(img: &ColorImage) -> impl Iterator<Item = &f64> + Clone {
    img.channels().iter().flat_map(|c| c.data().iter())
}

/// Mean squared error over all channels and pixels.
pub fn mse(a: &ColorImage, b: &ColorImage) -> Result<f64> {
    check_color(a, b)?;
    let n = 3 * a.width() * a.height();
    Ok(samples(a).zip(samples(b)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64)
}

pub fn mse_plane(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    a.check_dims(b, "plane dimension mismatch")?;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiMse {
    pub error: f64,
    pub scale: f64,
}

fn si_mse_slices<'a>(a: impl Iterator<Item = &'a f64> + Clone, b: impl Iterator<Item = &'a f64> + Clone, n: usize) -> Result<SiMse> {
    let aa: f64 = a.clone().map(|v| v * v).sum();
    if aa == 0.0 {
        return Err(Error::Domain("scale-invariant MSE is undefined when the first image is all zero".into()));
    }
    let ab: f64 = a.clone().zip(b.clone()).map(|(x, y)| x * y).sum();
    let scale = ab / aa;
    let error = a.zip(b).map(|(x, y)| (scale * x - y).powi(2)).sum::<f64>() / n as f64;
    Ok(SiMse { error, scale })
}

/// MSE after scaling `a` by the least-squares optimal scalar, shared by all channels.
pub fn si_mse(a: &ColorImage, b: &ColorImage) -> Result<SiMse> {
    check_color(a, b)?;
    si_mse_slices(samples(a), samples(b), 3 * a.width() * a.height())
}

pub fn si_mse_plane(a: &ImagePlane, b: &ImagePlane) -> Result<SiMse> {
    a.check_dims(b, "plane dimension mismatch")?;
    si_mse_slices(a.data().iter(), b.data().iter(), a.len())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let k: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Valid-region separable filtering; output is `(w-k+1) x (h-k+1)`.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut rows = vec![0.0; ow * h];
    rows.par_chunks_mut(ow).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = (0..n).map(|i| k[i] * src[y * w + x + i]).sum();
        }
    });
    let mut out = vec![0.0; ow * oh];
    out.par_chunks_mut(ow).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    });
    out
}

/// Mean local SSIM with an 11×11 Gaussian window (σ = 1.5) over the valid
/// region. Images smaller than the window use a window as large as the
/// smaller dimension.
pub fn ssim(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    a.check_dims(b, "plane dimension mismatch")?;
    let (w, h) = (a.width(), a.height());
    let k = gaussian_kernel(SSIM_WINDOW.min(w).min(h), SSIM_SIGMA);
    let (x, y) = (a.data(), b.data());
    let prod = |f: &dyn Fn(usize) -> f64| (0..x.len()).map(f).collect::<Vec<_>>();
    let mu_a = filter_valid(x, w, h, &k);
    let mu_b = filter_valid(y, w, h, &k);
    let aa = filter_valid(&prod(&|i| x[i] * x[i]), w, h, &k);
    let bb = filter_valid(&prod(&|i| y[i] * y[i]), w, h, &k);
    let ab = filter_valid(&prod(&|i| x[i] * y[i]), w, h, &k);
    let n = mu_a.len();
    let mut sum = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    Ok(sum / n as f64)
}

pub fn dssim(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    Ok(((1.0 - ssim(a, b)?) / 2.0).max(0.0))
}

/// Which samples the image metrics compare.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricChannels {
    #[default]
    Luminance,
    /// All three RGB channels; SSIM is averaged over channels.
    Rgb,
}

/// Optional inputs for the ratio and lighting losses.
#[derive(Debug, Clone, Default)]
pub struct EvalExtras {
    pub pred_ratio: Option<RatioImage>,
    pub truth_ratio: Option<RatioImage>,
    pub source_weights: Option<WeightMap>,
    pub target_weights: Option<WeightMap>,
    pub pred_lighting: Option<ShLighting>,
    pub truth_lighting: Option<ShLighting>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub si_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub si_mse_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_sborder: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_tborder: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_wratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_gradient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_lighting: Option<f64>,
    pub pixel_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
}

impl MetricReport {
    /// Present scalar fields by name, in a fixed order.
    pub fn scalars(&self) -> Vec<(&'static str, f64)> {
        [
            ("si_mse", self.si_mse),
            ("si_mse_scale", self.si_mse_scale),
            ("mse", self.mse),
            ("dssim", self.dssim),
            ("l_ratio", self.l_ratio),
            ("l_sborder", self.l_sborder),
            ("l_tborder", self.l_tborder),
            ("l_wratio", self.l_wratio),
            ("l_gradient", self.l_gradient),
            ("l_lighting", self.l_lighting),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }
}

/// Computes every metric whose inputs are available. Fields without inputs
/// stay `None`.
pub fn evaluate(relit: &ColorImage, target: &ColorImage, extras: &EvalExtras, channels: MetricChannels) -> Result<MetricReport> {
    check_color(relit, target)?;
    let mut r = MetricReport {
        pixel_count: relit.width() * relit.height(),
        ..Default::default()
    };
    match channels {
        MetricChannels::Luminance => {
            let (a, b) = (luminance(relit)?, luminance(target)?);
            r.mse = Some(mse_plane(&a, &b)?);
            // An all-black prediction has no optimal scale.
            if let Ok(s) = si_mse_plane(&a, &b) {
                r.si_mse = Some(s.error);
                r.si_mse_scale = Some(s.scale);
            }
            r.dssim = Some(dssim(&a, &b)?);
        }
        MetricChannels::Rgb => {
            r.mse = Some(mse(relit, target)?);
            if let Ok(s) = si_mse(relit, target) {
                r.si_mse = Some(s.error);
                r.si_mse_scale = Some(s.scale);
            }
            let mut d = 0.0;
            for c in 0..3 {
                d += dssim(relit.channel(c), target.channel(c))?;
            }
            r.dssim = Some(d / 3.0);
        }
    }
    if let (Some(p), Some(t)) = (&extras.pred_ratio, &extras.truth_ratio) {
        r.l_ratio = Some(l_ratio(p, t)?);
        r.l_gradient = Some(l_gradient(p, t)?);
        if let Some(w) = &extras.source_weights {
            r.l_sborder = Some(l_border(p, t, w)?);
            r.n_s = Some(nonzero_count(w));
        }
        if let Some(w) = &extras.target_weights {
            r.l_tborder = Some(l_border(p, t, w)?);
            r.n_t = Some(nonzero_count(w));
        }
        if let (Some(l), Some(s), Some(tb)) = (r.l_ratio, r.l_sborder, r.l_tborder) {
            r.l_wratio = Some(l + s + tb);
        }
    }
    if let (Some(p), Some(t)) = (&extras.pred_lighting, &extras.truth_lighting) {
        r.l_lighting = Some(lighting_error(p, t));
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub path: String,
    #[serde(flatten)]
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub per_image: Vec<ImageEntry>,
    pub mean: BTreeMap<String, f64>,
    /// Population standard deviation.
    pub stddev: BTreeMap<String, f64>,
}

/// Sorts entries by path and aggregates each metric over the entries that have it.
pub fn aggregate(mut entries: Vec<ImageEntry>) -> BatchReport {
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for e in &entries {
        for (k, v) in e.metrics.scalars() {
            columns.entry(k.to_string()).or_default().push(v);
        }
    }
    let mut mean = BTreeMap::new();
    let mut stddev = BTreeMap::new();
    for (k, vs) in columns {
        let n = vs.len() as f64;
        let m = vs.iter().sum::<f64>() / n;
        let var = vs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        mean.insert(k.clone(), m);
        stddev.insert(k, var.sqrt());
    }
    BatchReport {
        per_image: entries,
        mean,
        stddev,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ColorSpace;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ratio(w: usize, h: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> RatioImage {
        RatioImage::from_plane(ImagePlane::from_fn(w, h, f).unwrap()).unwrap()
    }

    fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> ImagePlane {
        ImagePlane::new(w, h, (0..w * h).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
    }

    fn random_color(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ColorImage {
        let c = [0; 3].map(|_| random_plane(rng, w, h, 0.0, 1.0));
        ColorImage::new(ColorSpace::Rgb, c).unwrap()
    }

    #[test]
    fn l_ratio_values() {
        let ten = ratio(4, 3, |_, _| 10.0);
        let one = ratio(4, 3, |_, _| 1.0);
        assert_eq!(l_ratio(&ten, &ten).unwrap(), 0.0);
        assert_abs_diff_eq!(l_ratio(&ten, &one).unwrap(), 1.0, epsilon = 1e-15);
        let r = ratio(5, 4, |x, y| 0.3 + 0.2 * x as f64 + 0.07 * y as f64);
        let one = ratio(5, 4, |_, _| 1.0);
        assert_abs_diff_eq!(l_ratio(&r, &one).unwrap(), l_ratio(&r.reciprocal(), &one).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn border_loss_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = RatioImage::from_plane(random_plane(&mut rng, 7, 5, 0.2, 3.0)).unwrap();
        let t = RatioImage::from_plane(random_plane(&mut rng, 7, 5, 0.2, 3.0)).unwrap();
        assert_eq!(l_border(&p, &t, &WeightMap::zeros(7, 5).unwrap()).unwrap(), 0.0);
        assert_abs_diff_eq!(
            l_border(&p, &t, &WeightMap::uniform(7, 5, 1.0).unwrap()).unwrap(),
            l_ratio(&p, &t).unwrap(),
            epsilon = 1e-15
        );
        // Sparse random weights against a naive loop.
        let w = WeightMap {
            plane: ImagePlane::new(7, 5, (0..35).map(|_| if rng.random_bool(0.4) { rng.random_range(0.0..10.0) } else { 0.0 }).collect()).unwrap(),
        };
        let mut s = 0.0;
        let mut n = 0;
        for i in 0..35 {
            let wi = w.plane().data()[i];
            if wi > 0.0 {
                n += 1;
            }
            s += wi * (p.plane().data()[i].log10() - t.plane().data()[i].log10()).abs();
        }
        assert_abs_diff_eq!(l_border(&p, &t, &w).unwrap(), s / n as f64, epsilon = 1e-12);
        let z = WeightMap::zeros(7, 5).unwrap();
        assert_abs_diff_eq!(
            l_wratio(&p, &t, &w, &w).unwrap(),
            l_ratio(&p, &t).unwrap() + 2.0 * s / n as f64,
            epsilon = 1e-12
        );
        assert_eq!(l_wratio(&p, &t, &z, &z).unwrap(), l_ratio(&p, &t).unwrap());
        assert_eq!(l_wratio(&p, &p, &w, &w).unwrap(), 0.0);
    }

    #[test]
    fn gradient_loss() {
        let p = ratio(6, 5, |x, y| 1.0 + 0.1 * (x * y) as f64);
        let shifted = ratio(6, 5, |x, y| 1.5 + 0.1 * (x * y) as f64);
        assert_eq!(l_gradient(&p, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(l_gradient(&p, &shifted).unwrap(), 0.0, epsilon = 1e-12);
        // Central pixel oracle: a single bump at (2, 2).
        let bump = ratio(6, 5, |x, y| if (x, y) == (2, 2) { 2.0 } else { 1.0 });
        let flat = ratio(6, 5, |_, _| 1.0);
        // Differences touching the bump: ∂x at (1,2), (2,2); ∂y at (2,1), (2,2).
        assert_abs_diff_eq!(l_gradient(&bump, &flat).unwrap(), 4.0 / 30.0, epsilon = 1e-12);
    }

    #[test]
    fn mse_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_color(&mut rng, 6, 4);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = ColorImage::new(ColorSpace::Rgb, a.channels().clone().map(|c| c.map(|v| v + 0.1))).unwrap();
        assert_abs_diff_eq!(mse(&a, &b).unwrap(), 0.01, epsilon = 1e-12);
        let c = random_color(&mut rng, 6, 4);
        let mut s = 0.0;
        for ch in 0..3 {
            for y in 0..4 {
                for x in 0..6 {
                    s += (a.channel(ch).get(x, y) - c.channel(ch).get(x, y)).powi(2);
                }
            }
        }
        assert_abs_diff_eq!(mse(&a, &c).unwrap(), s / 72.0, epsilon = 1e-12);
    }

    #[test]
    fn si_mse_scale_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_color(&mut rng, 6, 4);
        for k in [0.5, 1.0, 3.0] {
            let b = ColorImage::new(ColorSpace::Rgb, a.channels().clone().map(|c| c.map(|v| k * v))).unwrap();
            let s = si_mse(&a, &b).unwrap();
            assert_abs_diff_eq!(s.error, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.scale, k, epsilon = 1e-12);
        }
        let zero = ColorImage::gray(&ImagePlane::zeros(6, 4).unwrap());
        assert!(si_mse(&zero, &a).is_err());
        let c = random_color(&mut rng, 6, 4);
        assert!(si_mse(&a, &c).unwrap().error <= mse(&a, &c).unwrap());
    }

    #[test]
    fn ssim_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_plane(&mut rng, 24, 20, 0.0, 1.0);
        let b = random_plane(&mut rng, 24, 20, 0.0, 1.0);
        assert_abs_diff_eq!(ssim(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(dssim(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap(), epsilon = 1e-12);
        let d = dssim(&a, &b).unwrap();
        assert!((0.0..=1.0).contains(&d));

        // Constant patches: variances vanish and only C1 survives.
        let zero = ImagePlane::zeros(16, 16).unwrap();
        let one = ImagePlane::filled(16, 16, 1.0).unwrap();
        let want = SSIM_C1 / (1.0 + SSIM_C1);
        assert_abs_diff_eq!(ssim(&zero, &one).unwrap(), want, epsilon = 1e-12);
        assert_abs_diff_eq!(dssim(&zero, &one).unwrap(), (1.0 - want) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ssim_matches_direct_window_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_plane(&mut rng, 13, 12, 0.0, 1.0);
        let b = random_plane(&mut rng, 13, 12, 0.0, 1.0);
        // 2-D Gaussian evaluated directly at every valid window position.
        let mut g = [[0.0; 11]; 11];
        let mut total = 0.0;
        for (i, row) in g.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
                *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
                total += *v;
            }
        }
        let mut sum = 0.0;
        for oy in 0..2 {
            for ox in 0..3 {
                let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let w = g[i][j] / total;
                        let (x, y) = (a.get(ox + j, oy + i), b.get(ox + j, oy + i));
                        ma += w * x;
                        mb += w * y;
                        aa += w * x * x;
                        bb += w * y * y;
                        ab += w * x * y;
                    }
                }
                let (va, vb, cv) = (aa - ma * ma, bb - mb * mb, ab - ma * mb);
                sum += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cv + SSIM_C2)) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
            }
        }
        assert_abs_diff_eq!(ssim(&a, &b).unwrap(), sum / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn ssim_small_images() {
        let a = ImagePlane::from_fn(5, 4, |x, y| (x + y) as f64 / 8.0).unwrap();
        assert_abs_diff_eq!(ssim(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_color(&mut rng, 16, 12);
        let r = evaluate(&a, &a, &EvalExtras::default(), MetricChannels::Luminance).unwrap();
        assert_eq!(r.mse, Some(0.0));
        assert_eq!(r.dssim, Some(0.0));
        assert_abs_diff_eq!(r.si_mse.unwrap(), 0.0, epsilon = 1e-15);
        assert!(r.l_ratio.is_none() && r.l_lighting.is_none() && r.n_s.is_none());
        assert_eq!(r.pixel_count, 192);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("l_ratio").is_none());

        let p = RatioImage::from_plane(random_plane(&mut rng, 16, 12, 0.5, 2.0)).unwrap();
        let t = RatioImage::identity(16, 12).unwrap();
        let w = WeightMap::uniform(16, 12, 1.0).unwrap();
        let extras = EvalExtras {
            pred_ratio: Some(p.clone()),
            truth_ratio: Some(t.clone()),
            source_weights: Some(w.clone()),
            target_weights: Some(WeightMap::zeros(16, 12).unwrap()),
            pred_lighting: Some(ShLighting::zero()),
            truth_lighting: Some(ShLighting::from_coeffs([1.0; 9])),
        };
        let b = random_color(&mut rng, 16, 12);
        let r = evaluate(&a, &b, &extras, MetricChannels::Rgb).unwrap();
        let lr = l_ratio(&p, &t).unwrap();
        assert_eq!(r.l_ratio, Some(lr));
        assert_abs_diff_eq!(r.l_wratio.unwrap(), 2.0 * lr, epsilon = 1e-12);
        assert_eq!((r.n_s, r.n_t), (Some(192), Some(0)));
        assert_eq!(r.l_lighting, Some(9.0));
        assert_eq!(r.mse, Some(mse(&a, &b).unwrap()));
    }

    #[test]
    fn batch_aggregation_is_order_free() {
        let mk = |path: &str, m: f64| ImageEntry {
            path: path.into(),
            metrics: MetricReport { mse: Some(m), pixel_count: 1, ..Default::default() },
        };
        let a = aggregate(vec![mk("b.png", 3.0), mk("a.png", 1.0)]);
        let b = aggregate(vec![mk("a.png", 1.0), mk("b.png", 3.0)]);
        assert_eq!(a, b);
        assert_eq!(a.per_image[0].path, "a.png");
        assert_eq!(a.mean["mse"], 2.0);
        assert_eq!(a.stddev["mse"], 1.0);
        assert!(!a.mean.contains_key("dssim"));
    }

    proptest! {
        #[test]
        fn metrics_are_nonnegative(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_color(&mut rng, 12, 11);
            let b = random_color(&mut rng, 12, 11);
            let r = evaluate(&a, &b, &EvalExtras::default(), MetricChannels::Rgb).unwrap();
            for (_, v) in r.scalars() {
                prop_assert!(v >= 0.0 && v.is_finite());
            }
            prop_assert!(r.si_mse.unwrap() <= r.mse.unwrap() + 1e-15);
            prop_assert!(r.dssim.unwrap() <= 1.0);
        }
    }
}
