//! Ratio-image relighting.
//!
//! Source and target shadings are rendered from SH lighting with shadow
//! masks, gamma-encoded, and divided to form a ratio image. The ratio scales
//! the gamma-encoded Y channel of the source photo; chrominance is kept.

use serde::{Deserialize, Serialize};

use crate::border::{border_weights, BorderParams, WeightMap};
use crate::error::{Error, Result};
use crate::image::{gamma_decode, gamma_encode, luminance, rgb_to_yuv, yuv_to_rgb, ColorImage, ColorSpace, ImagePlane, DEFAULT_GAMMA};
use crate::lighting::{estimate_ambient, inject_ambient, project_light, shade, AmbientMode, ShLighting};
use crate::mesh::{GBuffer, TriMesh};
use crate::shadow::{shadow_mask, LightSpec, ShadowMask};

pub const DEFAULT_RATIO_EPSILON: f64 = 1e-3;

/// Strictly positive per-pixel luminance ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioImage {
    plane: ImagePlane,
    epsilon: f64,
}

impl RatioImage {
    /// Checks that every sample is finite and at least `epsilon > 0`.
    pub fn new(plane: ImagePlane, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Parameter(format!("ratio epsilon must be > 0, got {epsilon}")));
        }
        if let Some(i) = plane.data().iter().position(|&v| !(v >= epsilon && v.is_finite())) {
            return Err(Error::PixelDomain {
                x: i % plane.width(),
                y: i / plane.width(),
                msg: format!("ratio sample {} is below epsilon {epsilon}", plane.data()[i]),
            });
        }
        Ok(Self { plane, epsilon })
    }

    /// Wraps samples of unknown provenance, using their minimum as epsilon.
    pub fn from_plane(plane: ImagePlane) -> Result<Self> {
        let eps = plane.min();
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("ratio images must be positive, minimum is {eps}")));
        }
        Self::new(plane, eps)
    }

    pub fn identity(width: usize, height: usize) -> Result<Self> {
        Self::new(ImagePlane::filled(width, height, 1.0)?, DEFAULT_RATIO_EPSILON)
    }

    pub fn plane(&self) -> &ImagePlane {
        &self.plane
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn width(&self) -> usize {
        self.plane.width()
    }

    pub fn height(&self) -> usize {
        self.plane.height()
    }

    pub fn reciprocal(&self) -> RatioImage {
        let plane = self.plane.map(|v| 1.0 / v);
        let epsilon = self.epsilon.min(plane.min());
        RatioImage { plane, epsilon }
    }
}

/// `max(enc(target), ε) / max(enc(source), ε)` with `enc(v) = v^gamma`.
pub fn ratio_from_shadings(source: &ImagePlane, target: &ImagePlane, epsilon: f64, gamma: f64) -> Result<RatioImage> {
    source.check_dims(target, "shading dimension mismatch")?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!("ratio epsilon must be > 0, got {epsilon}")));
    }
    let s = gamma_encode(source, gamma)?;
    let t = gamma_encode(target, gamma)?;
    let plane = t.zip_map(&s, |t, s| t.max(epsilon) / s.max(epsilon))?;
    RatioImage::new(plane, epsilon)
}

/// Scales the gamma-encoded luminance of `source` by `ratio` and recombines
/// it with the source chrominance. The result is clamped to `[0, 1]`.
pub fn apply_ratio(source: &ColorImage, ratio: &RatioImage, gamma: f64) -> Result<ColorImage> {
    if source.space() != ColorSpace::Rgb {
        return Err(Error::Structural("apply_ratio expects an RGB image".into()));
    }
    source.channel(0).check_dims(ratio.plane(), "image/ratio dimension mismatch")?;
    let [y, u, v] = rgb_to_yuv(source)?.into_channels();
    // Slightly negative luminance can only come from out-of-range input.
    let y = y.map(|v| v.max(0.0));
    let scaled = gamma_encode(&y, gamma)?.zip_map(ratio.plane(), |e, r| e * r)?;
    let y = gamma_decode(&scaled, gamma)?;
    yuv_to_rgb(&ColorImage::new(ColorSpace::Yuv, [y, u, v])?)
}

/// Multiplies every channel of `albedo` by `shading`, clamped to `[0, 1]`.
pub fn render_photo(albedo: &ColorImage, shading: &ImagePlane) -> Result<ColorImage> {
    let [r, g, b] = albedo.channels();
    let mul = |c: &ImagePlane| c.zip_map(shading, |a, s| (a * s).clamp(0.0, 1.0));
    ColorImage::new(ColorSpace::Rgb, [mul(r)?, mul(g)?, mul(b)?])
}

/// A light for relighting: the geometric light drives the shadow mask, the
/// SH lighting drives shading. Without explicit SH the light is projected
/// from the mesh centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightInput {
    pub spec: LightSpec,
    pub sh: Option<ShLighting>,
}

impl From<LightSpec> for LightInput {
    fn from(spec: LightSpec) -> Self {
        Self { spec, sh: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbientSource {
    /// Mean source luminance over source-shadow pixels, or `default` when the
    /// source mask has no shadow pixels.
    Estimate { default: Option<f64> },
    Fixed(f64),
}

impl Default for AmbientSource {
    fn default() -> Self {
        AmbientSource::Estimate { default: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelightConfig {
    pub ambient: AmbientSource,
    /// Ambient for the target lighting; the source ambient when `None`.
    pub target_ambient: Option<f64>,
    pub ambient_mode: AmbientMode,
    pub epsilon: f64,
    pub gamma: f64,
    /// Border weights are skipped when `None`.
    pub border: Option<BorderParams>,
}

impl Default for RelightConfig {
    fn default() -> Self {
        Self {
            ambient: AmbientSource::default(),
            target_ambient: None,
            ambient_mode: AmbientMode::Direct,
            epsilon: DEFAULT_RATIO_EPSILON,
            gamma: DEFAULT_GAMMA,
            border: Some(BorderParams::default()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelightOutput {
    pub relit: ColorImage,
    pub ratio: RatioImage,
    pub source_mask: ShadowMask,
    pub target_mask: ShadowMask,
    pub source_shading: ImagePlane,
    pub target_shading: ImagePlane,
    pub source_lighting: ShLighting,
    pub target_lighting: ShLighting,
    /// Weights from the source mask and gamma-encoded source luminance.
    pub source_weights: Option<WeightMap>,
    /// Weights from the target mask and gamma-encoded relit luminance.
    pub target_weights: Option<WeightMap>,
}

fn prepare_lighting(light: &LightInput, mesh: &TriMesh, mode: AmbientMode, ambient: f64) -> Result<ShLighting> {
    let mut sh = match light.sh {
        Some(sh) => sh,
        None => project_light(&light.spec, &mesh.centroid())?,
    };
    // Lighting that already carries an ambient term is used as given.
    if sh.ambient != 0.0 {
        return Ok(sh);
    }
    sh.mode = mode;
    inject_ambient(&sh, ambient)
}

/// Relights `source`, whose pixels are aligned with `gbuffer`, from
/// `source_light` to `target_light`.
pub fn relight(
    source: &ColorImage,
    gbuffer: &GBuffer,
    mesh: &TriMesh,
    source_light: &LightInput,
    target_light: &LightInput,
    config: &RelightConfig,
) -> Result<RelightOutput> {
    if source.width() != gbuffer.width() || source.height() != gbuffer.height() {
        return Err(Error::Structural(format!(
            "image is {}x{} but the G-buffer is {}x{}",
            source.width(),
            source.height(),
            gbuffer.width(),
            gbuffer.height()
        )));
    }
    let source_mask = shadow_mask(gbuffer, mesh, &source_light.spec)?;
    let target_mask = shadow_mask(gbuffer, mesh, &target_light.spec)?;
    let source_y = luminance(source)?.map(|v| v.max(0.0));

    let ambient = match config.ambient {
        AmbientSource::Fixed(a) => a,
        AmbientSource::Estimate { default } => match estimate_ambient(&source_y, &source_mask) {
            Err(Error::NoShadowPixels) if default.is_some() => default.unwrap_or_default(),
            other => other?,
        },
    };
    let target_ambient = config.target_ambient.unwrap_or(ambient);
    let source_lighting = prepare_lighting(source_light, mesh, config.ambient_mode, ambient)?;
    let target_lighting = prepare_lighting(target_light, mesh, config.ambient_mode, target_ambient)?;

    let source_shading = shade(gbuffer, &source_lighting, Some(&source_mask))?;
    let target_shading = shade(gbuffer, &target_lighting, Some(&target_mask))?;
    let ratio = ratio_from_shadings(&source_shading, &target_shading, config.epsilon, config.gamma)?;
    let relit = apply_ratio(source, &ratio, config.gamma)?;

    let (source_weights, target_weights) = match &config.border {
        Some(params) => {
            let src_enc = gamma_encode(&source_y, config.gamma)?;
            let relit_enc = gamma_encode(&luminance(&relit)?.map(|v| v.max(0.0)), config.gamma)?;
            (
                Some(border_weights(&source_mask, &src_enc, params)?),
                Some(border_weights(&target_mask, &relit_enc, params)?),
            )
        }
        None => (None, None),
    };

    Ok(RelightOutput {
        relit,
        ratio,
        source_mask,
        target_mask,
        source_shading,
        target_shading,
        source_lighting,
        target_lighting,
        source_weights,
        target_weights,
    })
}
