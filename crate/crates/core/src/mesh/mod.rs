//! Posed triangle meshes, orthographic G-buffer rasterization and
//! BVH-accelerated ray queries.
//!
//! Coordinates are image aligned: after posing, `x` and `y` are pixel
//! coordinates (`y` grows downward) and `+z` points toward the camera.

mod bvh;
mod intersect;
mod obj;
mod pose;

use nalgebra::Vector3;
use rayon::prelude::*;

pub use bvh::{Aabb, Bvh, RawHit, LEAF_SIZE};
pub use intersect::{ShearedRay, TriangleHit};
pub use obj::{format_obj, load_obj, parse_obj, write_obj};
pub use pose::Pose;

use crate::error::{Error, Result};
use crate::image::ImagePlane;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Creates a ray; `direction` must be unit length within `1e-6`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self> {
        if ((direction.norm() - 1.0).abs()) > 1e-6 {
            return Err(Error::Domain(format!(
                "ray direction must be unit length, got norm {}",
                direction.norm()
            )));
        }
        Ok(Self { origin, direction })
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: u32,
    pub barycentric: [f64; 3],
    /// Unit normal interpolated from the vertex normals.
    pub normal: Vec3,
    pub position: Vec3,
}

/// Triangle mesh with unit vertex normals and a BVH over its triangles.
#[derive(Debug, Clone)]
pub struct TriMesh {
    positions: Vec<Vec3>,
    normals: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    /// Geometric triangle normals flipped to agree with the vertex normals.
    face_normals: Vec<Vec3>,
    bvh: Bvh,
}

impl TriMesh {
    /// Builds a mesh. Missing (or zero-length) normals are synthesized as
    /// area-weighted averages of the adjacent face normals; supplied ones are
    /// normalized.
    pub fn new(positions: Vec<Vec3>, normals: Option<Vec<Vec3>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let n = positions.len();
        if let Some((i, t)) = triangles
            .iter()
            .enumerate()
            .find(|(_, t)| t.iter().any(|&v| v as usize >= n))
        {
            return Err(Error::Structural(format!(
                "triangle {i} references vertex {t:?} but the mesh has {n} vertices"
            )));
        }
        if let Some(ns) = &normals {
            if ns.len() != n {
                return Err(Error::Structural(format!(
                    "{} normals supplied for {n} vertices",
                    ns.len()
                )));
            }
        }
        if positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Domain("vertex positions must be finite".into()));
        }

        let synthesized = area_weighted_normals(&positions, &triangles);
        let normals: Vec<Vec3> = match normals {
            None => synthesized,
            Some(ns) => ns
                .into_iter()
                .zip(synthesized)
                .map(|(given, fallback)| {
                    let len = given.norm();
                    if len > 1e-12 && len.is_finite() {
                        given / len
                    } else {
                        fallback
                    }
                })
                .collect(),
        };
        Ok(Self::assemble(positions, normals, triangles))
    }

    fn assemble(positions: Vec<Vec3>, normals: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        let face_normals = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| positions[i as usize]);
                let g = (b - a).cross(&(c - a));
                let shading: Vec3 = t.iter().map(|&i| normals[i as usize]).sum();
                let g = if g.dot(&shading) < 0.0 { -g } else { g };
                let len = g.norm();
                if len > 0.0 {
                    g / len
                } else {
                    Vec3::zeros()
                }
            })
            .collect();
        let bvh = Bvh::build(&positions, &triangles);
        Self {
            positions,
            normals,
            triangles,
            face_normals,
            bvh,
        }
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// Unit geometric normal of a triangle, oriented to agree with its vertex
    /// normals (zero for degenerate triangles).
    pub fn face_normal(&self, triangle: u32) -> Vec3 {
        self.face_normals[triangle as usize]
    }

    pub fn bounds(&self) -> Aabb {
        self.bvh.bounds()
    }

    /// Mean of the vertex positions.
    pub fn centroid(&self) -> Vec3 {
        self.positions.iter().sum::<Vec3>() / self.positions.len().max(1) as f64
    }

    /// Returns a transformed copy: positions get `scale * R * v + t`, normals
    /// get `R * n`, and the BVH is rebuilt.
    pub fn apply_pose(&self, pose: &Pose) -> TriMesh {
        let positions = self.positions.iter().map(|p| pose.transform_point(p)).collect();
        let normals = self.normals.iter().map(|n| (pose.rotation * n).normalize()).collect();
        Self::assemble(positions, normals, self.triangles.clone())
    }

    fn hit_from_raw(&self, raw: RawHit) -> Hit {
        let [a, b, c] = self.triangles[raw.triangle as usize].map(|i| self.normals[i as usize]);
        let [wa, wb, wc] = raw.barycentric;
        let n = a * wa + b * wb + c * wc;
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { self.face_normal(raw.triangle) };
        let [pa, pb, pc] = self.triangles[raw.triangle as usize].map(|i| self.positions[i as usize]);
        Hit {
            t: raw.t,
            triangle: raw.triangle,
            barycentric: raw.barycentric,
            normal,
            position: pa + (pb - pa) * wb + (pc - pa) * wc,
        }
    }

    /// Nearest hit with `t_min < t < t_max`, traversing the BVH.
    pub fn intersect(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<Hit> {
        self.bvh
            .nearest(ray, t_min, t_max, &self.positions, &self.triangles)
            .map(|raw| self.hit_from_raw(raw))
    }

    /// Tests a single triangle without the BVH.
    pub fn intersect_triangle(&self, ray: &Ray, triangle: u32, t_min: f64, t_max: f64) -> Option<Hit> {
        let [a, b, c] = self.triangles[triangle as usize].map(|i| &self.positions[i as usize]);
        ShearedRay::new(ray).intersect(a, b, c, t_min, t_max).map(|h| {
            self.hit_from_raw(RawHit {
                t: h.t,
                triangle,
                barycentric: h.barycentric,
            })
        })
    }

    /// Whether the ray hits any triangle accepted by `accept` within `(t_min, t_max)`.
    pub fn occluded(&self, ray: &Ray, t_min: f64, t_max: f64, accept: impl Fn(u32) -> bool) -> bool {
        self.bvh
            .any_hit(ray, t_min, t_max, &self.positions, &self.triangles, accept)
    }
}

fn area_weighted_normals(positions: &[Vec3], triangles: &[[u32; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); positions.len()];
    for t in triangles {
        let [a, b, c] = t.map(|i| positions[i as usize]);
        // The cross product's length is twice the area, which is the weight.
        let n = (b - a).cross(&(c - a));
        for &i in t {
            acc[i as usize] += n;
        }
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vec3::z()
            }
        })
        .collect()
}

/// Per-pixel geometry from orthographic rasterization.
#[derive(Debug, Clone)]
pub struct GBuffer {
    /// 1 where a ray hit the mesh, else 0.
    pub hit_mask: ImagePlane,
    pub normal: [ImagePlane; 3],
    /// `z` of the hit point (0 for background).
    pub depth: ImagePlane,
    pub position: [ImagePlane; 3],
    /// Hit triangle per pixel, `u32::MAX` for background.
    pub triangle: Vec<u32>,
}

impl GBuffer {
    pub fn width(&self) -> usize {
        self.hit_mask.width()
    }

    pub fn height(&self) -> usize {
        self.hit_mask.height()
    }

    #[inline]
    pub fn covered(&self, x: usize, y: usize) -> bool {
        self.hit_mask.get(x, y) == 1.0
    }

    #[inline]
    pub fn normal_at(&self, x: usize, y: usize) -> Vec3 {
        Vec3::new(self.normal[0].get(x, y), self.normal[1].get(x, y), self.normal[2].get(x, y))
    }

    #[inline]
    pub fn position_at(&self, x: usize, y: usize) -> Vec3 {
        Vec3::new(
            self.position[0].get(x, y),
            self.position[1].get(x, y),
            self.position[2].get(x, y),
        )
    }

    #[inline]
    pub fn triangle_at(&self, x: usize, y: usize) -> Option<u32> {
        let t = self.triangle[y * self.width() + x];
        (t != u32::MAX).then_some(t)
    }
}

/// Height above the mesh's bounding box from which primary rays start.
pub fn camera_z(mesh: &TriMesh) -> f64 {
    let b = mesh.bounds();
    b.max.z + 1.0 + b.diagonal()
}

/// The primary ray through the centre of pixel `(x, y)`.
pub fn pixel_ray(x: usize, y: usize, z_far: f64) -> Ray {
    Ray {
        origin: Vec3::new(x as f64 + 0.5, y as f64 + 0.5, z_far),
        direction: Vec3::new(0.0, 0.0, -1.0),
    }
}

/// Casts one parallel ray per pixel centre along `-z` and records the nearest hit.
pub fn rasterize_geometry(mesh: &TriMesh, width: usize, height: usize) -> Result<GBuffer> {
    rasterize_with(width, height, camera_z(mesh), |ray| mesh.intersect(ray, 0.0, f64::INFINITY))
}

/// Rasterization driven by an arbitrary nearest-hit query.
pub fn rasterize_with(
    width: usize,
    height: usize,
    z_far: f64,
    query: impl Fn(&Ray) -> Option<Hit> + Sync,
) -> Result<GBuffer> {
    if width == 0 || height == 0 {
        return Err(Error::Structural(format!("invalid raster size {width}x{height}")));
    }
    let rows: Vec<Vec<Option<Hit>>> = (0..height)
        .into_par_iter()
        .map(|y| (0..width).map(|x| query(&pixel_ray(x, y, z_far))).collect())
        .collect();

    let n = width * height;
    let mut hit = vec![0.0; n];
    let mut normal = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut position = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut depth = vec![0.0; n];
    let mut triangle = vec![u32::MAX; n];
    for (y, row) in rows.into_iter().enumerate() {
        for (x, h) in row.into_iter().enumerate() {
            let Some(h) = h else { continue };
            let i = y * width + x;
            // Primary rays run along -z, so x and y are the pixel centre exactly.
            let ray = pixel_ray(x, y, z_far);
            let h = Hit {
                position: Vec3::new(ray.origin.x, ray.origin.y, h.position.z),
                ..h
            };
            hit[i] = 1.0;
            for k in 0..3 {
                normal[k][i] = h.normal[k];
                position[k][i] = h.position[k];
            }
            depth[i] = h.position.z;
            triangle[i] = h.triangle;
        }
    }
    let plane = |d| ImagePlane::new(width, height, d);
    let [nx, ny, nz] = normal;
    let [px, py, pz] = position;
    Ok(GBuffer {
        hit_mask: plane(hit)?,
        normal: [plane(nx)?, plane(ny)?, plane(nz)?],
        depth: plane(depth)?,
        position: [plane(px)?, plane(py)?, plane(pz)?],
        triangle,
    })
}
