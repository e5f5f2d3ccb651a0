//! Nine-coefficient spherical-harmonics lighting.
//!
//! Coefficients are real SH ordered `(l, m)` = (0,0), (1,-1), (1,0), (1,1),
//! (2,-2), (2,-1), (2,0), (2,1), (2,2). Lambertian irradiance is
//! `E(n) = Σ Â_l c_lm Y_lm(n)` with `Â = (π, 2π/3, π/4)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePlane;
use crate::mesh::{GBuffer, Vec3};
use crate::shadow::{LightSpec, ShadowMask};

pub const Y00: f64 = 0.282_094_791_773_878_14;
pub const Y1: f64 = 0.488_602_511_902_919_9;
pub const Y2_CROSS: f64 = 1.092_548_430_592_079_2;
pub const Y20: f64 = 0.315_391_565_252_520_05;
pub const Y22: f64 = 0.546_274_215_296_039_6;

/// Lambertian band attenuation `Â_l`.
pub const LAMBERT: [f64; 3] = [PI, 2.0 * PI / 3.0, PI / 4.0];

const BAND: [usize; 9] = [0, 1, 1, 1, 2, 2, 2, 2, 2];

/// Real SH basis at `d`, which must be unit length within `1e-4`.
pub fn sh_basis(d: &Vec3) -> Result<[f64; 9]> {
    if ((d.norm() - 1.0).abs()) > 1e-4 {
        return Err(Error::Domain(format!("SH basis needs a unit direction, got norm {}", d.norm())));
    }
    Ok(sh_basis_unchecked(d))
}

#[inline]
pub fn sh_basis_unchecked(d: &Vec3) -> [f64; 9] {
    let (x, y, z) = (d.x, d.y, d.z);
    [
        Y00,
        Y1 * y,
        Y1 * z,
        Y1 * x,
        Y2_CROSS * x * y,
        Y2_CROSS * y * z,
        Y20 * (3.0 * z * z - 1.0),
        Y2_CROSS * x * z,
        Y22 * (x * x - y * y),
    ]
}

/// Unclamped irradiance of `coeffs` at unit normal `n`.
#[inline]
pub fn irradiance(coeffs: &[f64; 9], n: &Vec3) -> f64 {
    let basis = sh_basis_unchecked(n);
    let mut e = 0.0;
    for i in 0..9 {
        e += LAMBERT[BAND[i]] * coeffs[i] * basis[i];
    }
    e
}

/// How an ambient intensity enters the 0th coefficient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmbientMode {
    /// `c00 += a`.
    #[default]
    Direct,
    /// `c00 += a / (Â0 · Y00)`, so the shaded irradiance rises by exactly `a`.
    Irradiance,
}

impl AmbientMode {
    /// Amount added to `c00` for ambient intensity `a`.
    pub fn coefficient(self, a: f64) -> f64 {
        match self {
            AmbientMode::Direct => a,
            AmbientMode::Irradiance => a / (LAMBERT[0] * Y00),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShLighting {
    pub coeffs: [f64; 9],
    /// Ambient intensity already folded into `coeffs[0]` (0 if none).
    pub ambient: f64,
    pub mode: AmbientMode,
}

impl Default for ShLighting {
    fn default() -> Self {
        Self::zero()
    }
}

impl ShLighting {
    pub fn zero() -> Self {
        Self::from_coeffs([0.0; 9])
    }

    pub fn from_coeffs(coeffs: [f64; 9]) -> Self {
        Self {
            coeffs,
            ambient: 0.0,
            mode: AmbientMode::Direct,
        }
    }

    /// Coefficients with the recorded ambient removed from `c00`.
    pub fn directional(&self) -> [f64; 9] {
        let mut c = self.coeffs;
        c[0] -= self.mode.coefficient(self.ambient);
        c
    }

    /// Parses `{"sh":[9 floats],"ambient":a}` (optionally `"mode"`), or a
    /// light specification that is projected with [`project_light`] from `centroid`.
    pub fn from_json(text: &str, centroid: &Vec3) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("sh").is_some() {
            let j: ShJson = serde_json::from_value(value)?;
            if !(j.ambient >= 0.0) {
                return Err(Error::Domain(format!("ambient must be >= 0, got {}", j.ambient)));
            }
            Ok(Self {
                coeffs: j.sh,
                ambient: j.ambient,
                mode: j.mode.unwrap_or_default(),
            })
        } else {
            project_light(&LightSpec::from_value(value)?, centroid)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ShJson {
            sh: self.coeffs,
            ambient: self.ambient,
            mode: Some(self.mode),
        })
        .expect("lighting serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShJson {
    sh: [f64; 9],
    #[serde(default)]
    ambient: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<AmbientMode>,
}

/// Projects a light onto the SH basis as a delta light. Point lights use
/// their direction as seen from `centroid`.
pub fn project_light(light: &LightSpec, centroid: &Vec3) -> Result<ShLighting> {
    light.validate()?;
    let d = light.direction_from(centroid)?;
    let basis = sh_basis(&d)?;
    Ok(ShLighting::from_coeffs(basis.map(|b| light.intensity() * b)))
}

/// Mean luminance over covered shadow pixels.
pub fn estimate_ambient(luminance: &ImagePlane, mask: &ShadowMask) -> Result<f64> {
    luminance.check_dims(mask.plane(), "luminance/mask dimension mismatch")?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((&v, &m), &c) in luminance
        .data()
        .iter()
        .zip(mask.plane().data())
        .zip(mask.coverage().data())
    {
        if c == 1.0 && m == 0.0 {
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoShadowPixels);
    }
    Ok(sum / count as f64)
}

/// Adds ambient intensity `a` to the 0th coefficient using `lighting.mode`.
pub fn inject_ambient(lighting: &ShLighting, a: f64) -> Result<ShLighting> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("ambient must be finite and >= 0, got {a}")));
    }
    if lighting.ambient != 0.0 {
        return Err(Error::Contract(format!(
            "lighting already carries ambient {}",
            lighting.ambient
        )));
    }
    let mut out = *lighting;
    out.coeffs[0] += lighting.mode.coefficient(a);
    out.ambient = a;
    Ok(out)
}

/// Lambertian shading of a G-buffer.
///
/// Covered pixels get `max(0, E_dir(n)) + ambient`, where `E_dir` uses the
/// coefficients without the ambient share. Pixels shadowed in `mask` get the
/// ambient term only. Background pixels are 0.
pub fn shade(gbuffer: &GBuffer, lighting: &ShLighting, mask: Option<&ShadowMask>) -> Result<ImagePlane> {
    if let Some(m) = mask {
        gbuffer.hit_mask.check_dims(m.plane(), "G-buffer/mask dimension mismatch")?;
    }
    let directional = lighting.directional();
    let ambient = lighting.ambient;
    let (w, h) = (gbuffer.width(), gbuffer.height());
    let mut data = vec![0.0; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            if !gbuffer.covered(x, y) {
                continue;
            }
            let shadowed = mask.is_some_and(|m| !m.is_lit(x, y));
            *out = if shadowed {
                ambient
            } else {
                irradiance(&directional, &gbuffer.normal_at(x, y)).max(0.0) + ambient
            };
        }
    });
    ImagePlane::new(w, h, data)
}

/// Squared L2 distance between two coefficient vectors.
pub fn lighting_error(pred: &ShLighting, truth: &ShLighting) -> f64 {
    pred.coeffs
        .iter()
        .zip(&truth.coeffs)
        .map(|(p, t)| (p - t) * (p - t))
        .sum()
}
