use nalgebra::{Matrix3, Matrix4};
use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-5;

/// Similarity transform `v -> scale * rotation * v + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("pose scale must be positive, got {scale}")));
        }
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(err <= ORTHO_TOL) {
            return Err(Error::Domain(format!(
                "pose rotation is not orthonormal (max |RᵀR - I| = {err:e})"
            )));
        }
        if rotation.determinant() < 0.0 {
            return Err(Error::Domain("pose rotation must not contain a reflection".into()));
        }
        Ok(Self {
            rotation,
            translation,
            scale,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }

    /// Splits a homogeneous similarity matrix into rotation, scale and translation.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let bottom = m.fixed_view::<1, 4>(3, 0);
        if (bottom[0].abs() + bottom[1].abs() + bottom[2].abs() + (bottom[3] - 1.0).abs()) > ORTHO_TOL {
            return Err(Error::Domain("pose matrix must have bottom row [0, 0, 0, 1]".into()));
        }
        let linear: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
        let det = linear.determinant();
        if !(det > 0.0) {
            return Err(Error::Domain("pose matrix must have a positive determinant".into()));
        }
        let scale = det.cbrt();
        let translation = Vec3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]);
        Self::new(linear / scale, translation, scale)
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }

    /// `self ∘ first`: applying the result equals applying `first`, then `self`.
    pub fn after(&self, first: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation * self.scale + self.translation,
            scale: self.scale * first.scale,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        match serde_json::from_str::<PoseJson>(text)? {
            PoseJson::Parts {
                rotation,
                translation,
                scale,
            } => Self::new(
                Matrix3::from_row_slice(&rotation),
                Vec3::from_row_slice(&translation),
                scale,
            ),
            PoseJson::Matrix { matrix } => Self::from_matrix(&Matrix4::from_row_slice(&matrix)),
        }
    }

    pub fn to_json(&self) -> String {
        let r = self.rotation;
        let json = PoseJson::Parts {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [self.translation.x, self.translation.y, self.translation.z],
            scale: self.scale,
        };
        serde_json::to_string_pretty(&json).expect("pose serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum PoseJson {
    Parts {
        rotation: [f64; 9],
        translation: [f64; 3],
        scale: f64,
    },
    Matrix {
        matrix: [f64; 16],
    },
}
