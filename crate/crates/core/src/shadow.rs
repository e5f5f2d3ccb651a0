//! Binary shadow masks from a posed mesh and a light.
//!
//! A covered pixel is shadowed (0) when its surface faces away from the light
//! (self shadow) or when a feeler ray toward the light hits the mesh (cast
//! shadow); otherwise it is lit (1). Background pixels are stored as 0 and are
//! told apart from shadow by the coverage plane.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePlane;
use crate::mesh::{GBuffer, Ray, TriMesh, Vec3};

/// Feeler origin offset as a fraction of the mesh bounding-box diagonal.
pub const DEFAULT_FEELER_OFFSET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LightSpec {
    /// `direction` points from the surface toward the light.
    Directional { direction: Vec3, intensity: f64 },
    Point { position: Vec3, intensity: f64 },
}

impl LightSpec {
    pub fn directional(direction: Vec3, intensity: f64) -> Result<Self> {
        let light = LightSpec::Directional { direction, intensity };
        light.validate()?;
        Ok(light)
    }

    pub fn point(position: Vec3, intensity: f64) -> Result<Self> {
        let light = LightSpec::Point { position, intensity };
        light.validate()?;
        Ok(light)
    }

    pub fn validate(&self) -> Result<()> {
        let intensity = self.intensity();
        if !(intensity >= 0.0 && intensity.is_finite()) {
            return Err(Error::Domain(format!("light intensity must be >= 0, got {intensity}")));
        }
        match self {
            LightSpec::Directional { direction, .. } => {
                if (direction.norm() - 1.0).abs() > 1e-6 {
                    return Err(Error::Domain(format!(
                        "directional light needs a unit direction, got norm {}",
                        direction.norm()
                    )));
                }
            }
            LightSpec::Point { position, .. } => {
                if !position.iter().all(|c| c.is_finite()) {
                    return Err(Error::Domain("point light position must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn intensity(&self) -> f64 {
        match *self {
            LightSpec::Directional { intensity, .. } | LightSpec::Point { intensity, .. } => intensity,
        }
    }

    /// Unit vector from `surface_point` toward the light.
    pub fn direction_from(&self, surface_point: &Vec3) -> Result<Vec3> {
        match self {
            LightSpec::Directional { direction, .. } => Ok(*direction),
            LightSpec::Point { position, .. } => {
                let d = position - surface_point;
                let len = d.norm();
                if !(len > 1e-12) {
                    return Err(Error::DegenerateGeometry(format!(
                        "point light at {position:?} coincides with surface point {surface_point:?}"
                    )));
                }
                Ok(d / len)
            }
        }
    }

    /// Parses `{"type":"directional","direction":[..],"intensity":i}` or
    /// `{"type":"point","position":[..],"intensity":i}`. Directional vectors
    /// are normalized on input.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let light = match serde_json::from_value::<LightJson>(value)? {
            LightJson::Directional { direction, intensity } => {
                let d = Vec3::from(direction);
                if !(d.norm() > 0.0) {
                    return Err(Error::Domain("directional light direction is zero".into()));
                }
                LightSpec::Directional {
                    direction: d.normalize(),
                    intensity: intensity.unwrap_or(1.0),
                }
            }
            LightJson::Point { position, intensity } => LightSpec::Point {
                position: Vec3::from(position),
                intensity: intensity.unwrap_or(1.0),
            },
        };
        light.validate()?;
        Ok(light)
    }

    pub fn to_json(&self) -> String {
        let json = match *self {
            LightSpec::Directional { direction, intensity } => LightJson::Directional {
                direction: direction.into(),
                intensity: Some(intensity),
            },
            LightSpec::Point { position, intensity } => LightJson::Point {
                position: position.into(),
                intensity: Some(intensity),
            },
        };
        serde_json::to_string_pretty(&json).expect("light serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum LightJson {
    Directional {
        direction: [f64; 3],
        intensity: Option<f64>,
    },
    Point {
        position: [f64; 3],
        intensity: Option<f64>,
    },
}

/// Obtuse-angle test: true when the light arrives from behind the surface.
/// Grazing light (`n · l == 0`) counts as lit.
pub fn self_shadow_test(normal: &Vec3, light: &LightSpec, surface_point: &Vec3) -> Result<bool> {
    let l = light.direction_from(surface_point)?;
    Ok(normal.dot(&l) < 0.0)
}

/// Parameters of the feeler ray cast toward the light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeelerConfig {
    /// Origin offset along the light direction, in scene units.
    pub offset: f64,
}

impl FeelerConfig {
    /// Offset of `fraction` times the mesh bounding-box diagonal.
    pub fn for_mesh(mesh: &TriMesh, fraction: f64) -> Self {
        Self {
            offset: fraction * mesh.bounds().diagonal(),
        }
    }
}

/// The feeler ray from `surface_point` toward the light and its valid range.
pub fn feeler_ray(surface_point: &Vec3, light: &LightSpec, config: FeelerConfig) -> Result<(Ray, f64)> {
    let l = light.direction_from(surface_point)?;
    let origin = surface_point + l * config.offset;
    let t_max = match light {
        LightSpec::Directional { .. } => f64::INFINITY,
        LightSpec::Point { position, .. } => {
            let remaining = (position - origin).norm();
            if (position - surface_point).norm() <= config.offset {
                0.0
            } else {
                remaining
            }
        }
    };
    Ok((
        Ray {
            origin,
            direction: l,
        },
        t_max,
    ))
}

/// Whether a feeler hit on `hit_triangle` counts as an occluder.
///
/// A feeler leaving its own facet outward is blocked by any hit. A feeler that
/// starts out travelling into its facet (possible near the terminator, where
/// the smooth normal faces the light but the flat facet does not) only counts
/// hits on surfaces facing it; exit hits through the far side of the same
/// closed surface are ignored.
pub fn occluder_counts(mesh: &TriMesh, origin_triangle: Option<u32>, hit_triangle: u32, dir: &Vec3) -> bool {
    let leaves_outward = origin_triangle.is_none_or(|t| mesh.face_normal(t).dot(dir) > 0.0);
    leaves_outward || mesh.face_normal(hit_triangle).dot(dir) < 0.0
}

/// Shadow-feeler test for a point on the mesh. `origin_triangle` is the
/// triangle the point lies on, when known.
pub fn cast_shadow_test(
    surface_point: &Vec3,
    origin_triangle: Option<u32>,
    light: &LightSpec,
    mesh: &TriMesh,
    config: FeelerConfig,
) -> Result<bool> {
    let (ray, t_max) = feeler_ray(surface_point, light, config)?;
    if t_max <= 0.0 {
        return Ok(false);
    }
    Ok(mesh.occluded(&ray, 0.0, t_max, |tri| {
        occluder_counts(mesh, origin_triangle, tri, &ray.direction)
    }))
}

/// Binary shadow mask plus the coverage plane it is defined on.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowMask {
    plane: ImagePlane,
    coverage: ImagePlane,
}

impl ShadowMask {
    /// Validates that both planes are binary and that lit pixels are covered.
    pub fn new(plane: ImagePlane, coverage: ImagePlane) -> Result<Self> {
        plane.check_dims(&coverage, "mask/coverage dimension mismatch")?;
        for (i, (&m, &c)) in plane.data().iter().zip(coverage.data()).enumerate() {
            let (x, y) = (i % plane.width(), i / plane.width());
            if (m != 0.0 && m != 1.0) || (c != 0.0 && c != 1.0) {
                return Err(Error::PixelDomain {
                    x,
                    y,
                    msg: format!("mask and coverage must be binary, got {m} / {c}"),
                });
            }
            if m == 1.0 && c == 0.0 {
                return Err(Error::PixelDomain {
                    x,
                    y,
                    msg: "lit pixel outside coverage".into(),
                });
            }
        }
        Ok(Self { plane, coverage })
    }

    /// Builds a mask from arbitrary samples: values `>= 0.5` are lit, and
    /// everything outside `coverage` is forced to 0.
    pub fn from_threshold(plane: &ImagePlane, coverage: Option<&ImagePlane>) -> Result<Self> {
        let coverage = match coverage {
            Some(c) => c.map(|v| if v >= 0.5 { 1.0 } else { 0.0 }),
            None => ImagePlane::filled(plane.width(), plane.height(), 1.0)?,
        };
        let plane = plane.zip_map(&coverage, |m, c| if m >= 0.5 && c == 1.0 { 1.0 } else { 0.0 })?;
        Self::new(plane, coverage)
    }

    pub fn plane(&self) -> &ImagePlane {
        &self.plane
    }

    pub fn coverage(&self) -> &ImagePlane {
        &self.coverage
    }

    pub fn width(&self) -> usize {
        self.plane.width()
    }

    pub fn height(&self) -> usize {
        self.plane.height()
    }

    #[inline]
    pub fn is_lit(&self, x: usize, y: usize) -> bool {
        self.plane.get(x, y) == 1.0
    }

    #[inline]
    pub fn is_shadow(&self, x: usize, y: usize) -> bool {
        self.coverage.get(x, y) == 1.0 && self.plane.get(x, y) == 0.0
    }

    pub fn shadow_count(&self) -> usize {
        self.plane
            .data()
            .iter()
            .zip(self.coverage.data())
            .filter(|(&m, &c)| c == 1.0 && m == 0.0)
            .count()
    }
}

/// Shadow classification of a single covered pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelShade {
    Background,
    Lit,
    SelfShadow,
    CastShadow,
}

/// Classifies one G-buffer pixel with a caller-supplied feeler query.
pub fn classify_pixel(
    gbuffer: &GBuffer,
    x: usize,
    y: usize,
    light: &LightSpec,
    cast: impl Fn(&Vec3, Option<u32>) -> Result<bool>,
) -> Result<PixelShade> {
    if !gbuffer.covered(x, y) {
        return Ok(PixelShade::Background);
    }
    let p = gbuffer.position_at(x, y);
    if self_shadow_test(&gbuffer.normal_at(x, y), light, &p)? {
        return Ok(PixelShade::SelfShadow);
    }
    if cast(&p, gbuffer.triangle_at(x, y))? {
        return Ok(PixelShade::CastShadow);
    }
    Ok(PixelShade::Lit)
}

/// Per-pixel classification over the whole G-buffer.
pub fn classify(gbuffer: &GBuffer, mesh: &TriMesh, light: &LightSpec, config: FeelerConfig) -> Result<Vec<PixelShade>> {
    light.validate()?;
    if gbuffer.triangle.len() != gbuffer.width() * gbuffer.height()
        || gbuffer.triangle.iter().any(|&t| t != u32::MAX && t as usize >= mesh.triangles().len())
    {
        return Err(Error::Structural("G-buffer was not produced from this mesh".into()));
    }
    let w = gbuffer.width();
    let rows: Result<Vec<Vec<PixelShade>>> = (0..gbuffer.height())
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    classify_pixel(gbuffer, x, y, light, |p, tri| {
                        cast_shadow_test(p, tri, light, mesh, config)
                    })
                })
                .collect()
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

/// Builds a mask from per-pixel classifications.
pub fn mask_from_classes(gbuffer: &GBuffer, classes: &[PixelShade]) -> Result<ShadowMask> {
    let data = classes
        .iter()
        .map(|c| if *c == PixelShade::Lit { 1.0 } else { 0.0 })
        .collect();
    ShadowMask::new(
        ImagePlane::new(gbuffer.width(), gbuffer.height(), data)?,
        gbuffer.hit_mask.clone(),
    )
}

/// Shadow mask with the default feeler offset.
pub fn shadow_mask(gbuffer: &GBuffer, mesh: &TriMesh, light: &LightSpec) -> Result<ShadowMask> {
    shadow_mask_with(gbuffer, mesh, light, FeelerConfig::for_mesh(mesh, DEFAULT_FEELER_OFFSET))
}

pub fn shadow_mask_with(gbuffer: &GBuffer, mesh: &TriMesh, light: &LightSpec, config: FeelerConfig) -> Result<ShadowMask> {
    let classes = classify(gbuffer, mesh, light, config)?;
    mask_from_classes(gbuffer, &classes)
}
