//! Deterministic synthetic scenes: tessellated spheres, a box on a plane, two
//! spheres, and a two-step luminance image with known shadow borders.

use std::collections::HashMap;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{ColorImage, ColorSpace, ImagePlane};
use crate::mesh::{Pose, TriMesh, Vec3};
use crate::shadow::{LightSpec, ShadowMask};

/// A mesh in model space, the pose placing it on the pixel grid, and the
/// posed result.
#[derive(Debug, Clone)]
pub struct MeshScene {
    pub unposed: TriMesh,
    pub pose: Pose,
    pub mesh: TriMesh,
    pub width: usize,
    pub height: usize,
}

impl MeshScene {
    fn new(unposed: TriMesh, pose: Pose, width: usize, height: usize) -> Self {
        let mesh = unposed.apply_pose(&pose);
        Self {
            unposed,
            pose,
            mesh,
            width,
            height,
        }
    }
}

/// Unit UV sphere around the `z` axis. `stacks` is rounded up to an even
/// number so the `z = 0` silhouette ring consists of vertices.
pub fn uv_sphere(slices: usize, stacks: usize) -> TriMesh {
    let slices = slices.max(3);
    let stacks = (stacks.max(2) + 1) & !1;
    let mut positions = vec![Vec3::new(0.0, 0.0, 1.0)];
    for i in 1..stacks {
        let theta = std::f64::consts::PI * i as f64 / stacks as f64;
        let (st, ct) = theta.sin_cos();
        // The equator ring is snapped to z = 0 exactly.
        let z = if 2 * i == stacks { 0.0 } else { ct };
        for j in 0..slices {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / slices as f64;
            positions.push(Vec3::new(st * phi.cos(), st * phi.sin(), z));
        }
    }
    positions.push(Vec3::new(0.0, 0.0, -1.0));
    let ring = |i: usize, j: usize| (1 + (i - 1) * slices + j % slices) as u32;
    let south = (positions.len() - 1) as u32;
    let mut triangles = Vec::new();
    for j in 0..slices {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    for j in 0..slices {
        triangles.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    let normals = positions.iter().map(|p| p.normalize()).collect();
    TriMesh::new(positions, Some(normals), triangles).expect("valid sphere")
}

/// Unit icosphere; `subdivisions` levels give `20 * 4^levels` triangles.
pub fn icosphere(subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut positions: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, positions: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                positions.push(((positions[a as usize] + positions[b as usize]) * 0.5).normalize());
                (positions.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for [a, b, c] in triangles {
            let ab = midpoint(a, b, &mut positions);
            let bc = midpoint(b, c, &mut positions);
            let ca = midpoint(c, a, &mut positions);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    let normals = positions.clone();
    TriMesh::new(positions, Some(normals), triangles).expect("valid icosphere")
}

fn place(center: Vec3, radius: f64) -> Pose {
    Pose::new(Matrix3::identity(), center, radius).expect("valid pose")
}

/// A UV sphere of `radius` pixels centred in a `width x height` image.
pub fn sphere_scene(width: usize, height: usize, radius: f64) -> MeshScene {
    let pose = place(Vec3::new(width as f64 / 2.0, height as f64 / 2.0, 0.0), radius);
    MeshScene::new(uv_sphere(16, 12), pose, width, height)
}

/// A 1280-triangle icosphere centred in the image.
pub fn icosphere_scene(width: usize, height: usize, radius: f64) -> MeshScene {
    let pose = place(Vec3::new(width as f64 / 2.0, height as f64 / 2.0, 0.0), radius);
    MeshScene::new(icosphere(3), pose, width, height)
}

fn concat(parts: &[TriMesh]) -> TriMesh {
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut triangles = Vec::new();
    for m in parts {
        let base = positions.len() as u32;
        positions.extend_from_slice(m.positions());
        normals.extend_from_slice(m.normals());
        triangles.extend(m.triangles().iter().map(|t| t.map(|i| i + base)));
    }
    TriMesh::new(positions, Some(normals), triangles).expect("valid merged mesh")
}

fn quad(corners: [Vec3; 4], normal: Vec3) -> TriMesh {
    TriMesh::new(corners.to_vec(), Some(vec![normal; 4]), vec![[0, 1, 2], [0, 2, 3]]).expect("valid quad")
}

/// A `size x size` ground square at `z = 0` under a smaller square spanning
/// `span` in x and y at height `z`. Both face `+z`.
pub fn stacked_squares(size: f64, span: (f64, f64), z: f64) -> TriMesh {
    let sq = |a: f64, b: f64, z: f64| {
        quad(
            [Vec3::new(a, a, z), Vec3::new(b, a, z), Vec3::new(b, b, z), Vec3::new(a, b, z)],
            Vec3::z(),
        )
    };
    concat(&[sq(0.0, size, 0.0), sq(span.0, span.1, z)])
}

/// Closed axis-aligned box with one flat-shaded quad per face.
pub fn closed_box(min: Vec3, max: Vec3) -> TriMesh {
    let (a, b) = (min, max);
    let v = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
    concat(&[
        quad([v(a.x, a.y, b.z), v(b.x, a.y, b.z), v(b.x, b.y, b.z), v(a.x, b.y, b.z)], Vec3::z()),
        quad([v(a.x, a.y, a.z), v(a.x, b.y, a.z), v(b.x, b.y, a.z), v(b.x, a.y, a.z)], -Vec3::z()),
        quad([v(a.x, a.y, a.z), v(b.x, a.y, a.z), v(b.x, a.y, b.z), v(a.x, a.y, b.z)], -Vec3::y()),
        quad([v(a.x, b.y, a.z), v(a.x, b.y, b.z), v(b.x, b.y, b.z), v(b.x, b.y, a.z)], Vec3::y()),
        quad([v(a.x, a.y, a.z), v(a.x, a.y, b.z), v(a.x, b.y, b.z), v(a.x, b.y, a.z)], -Vec3::x()),
        quad([v(b.x, a.y, a.z), v(b.x, b.y, a.z), v(b.x, b.y, b.z), v(b.x, a.y, b.z)], Vec3::x()),
    ])
}

/// Box-on-plane fixture and its default oblique light.
#[derive(Debug, Clone)]
pub struct BoxOnPlane {
    pub scene: MeshScene,
    pub box_min: Vec3,
    pub box_max: Vec3,
    pub light: LightSpec,
}

impl BoxOnPlane {
    /// Analytic shadow mask: the top of the box is lit, and a plane pixel is
    /// shadowed iff the ray from it toward the light passes through the box.
    pub fn analytic_mask(&self) -> ShadowMask {
        let LightSpec::Directional { direction: l, .. } = self.light else {
            unreachable!("box scene uses a directional light")
        };
        let (w, h) = (self.scene.width, self.scene.height);
        let plane = ImagePlane::from_fn(w, h, |x, y| {
            let p = Vec3::new(x as f64 + 0.5, y as f64 + 0.5, 0.0);
            let on_top = (self.box_min.x..=self.box_max.x).contains(&p.x)
                && (self.box_min.y..=self.box_max.y).contains(&p.y);
            if on_top || !ray_hits_box(&p, &l, &self.box_min, &self.box_max) {
                1.0
            } else {
                0.0
            }
        })
        .expect("non-empty image");
        ShadowMask::new(plane, ImagePlane::filled(w, h, 1.0).expect("non-empty")).expect("binary mask")
    }
}

fn ray_hits_box(o: &Vec3, d: &Vec3, min: &Vec3, max: &Vec3) -> bool {
    let mut near = 0.0f64;
    let mut far = f64::INFINITY;
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < min[a] || o[a] > max[a] {
                return false;
            }
            continue;
        }
        let t1 = (min[a] - o[a]) / d[a];
        let t2 = (max[a] - o[a]) / d[a];
        near = near.max(t1.min(t2));
        far = far.min(t1.max(t2));
    }
    near <= far
}

pub fn box_on_plane(width: usize, height: usize) -> BoxOnPlane {
    let (w, h) = (width as f64, height as f64);
    let box_min = Vec3::new((w * 0.35).round(), (h * 0.35).round(), 6.0);
    let box_max = Vec3::new((w * 0.6).round(), (h * 0.6).round(), 16.0);
    let ground = quad(
        [Vec3::new(0.0, 0.0, 0.0), Vec3::new(w, 0.0, 0.0), Vec3::new(w, h, 0.0), Vec3::new(0.0, h, 0.0)],
        Vec3::z(),
    );
    let mesh = concat(&[ground, closed_box(box_min, box_max)]);
    BoxOnPlane {
        scene: MeshScene::new(mesh, Pose::identity(), width, height),
        box_min,
        box_max,
        light: LightSpec::directional(Vec3::new(0.3, 0.2, 1.0).normalize(), 1.0).expect("unit light"),
    }
}

/// A small sphere floating above and beside a larger one, plus a light that
/// makes the small one shadow the large one.
pub fn two_spheres(width: usize, height: usize) -> (MeshScene, LightSpec) {
    let (w, h) = (width as f64, height as f64);
    let big = uv_sphere(14, 10).apply_pose(&place(Vec3::new(0.58 * w, 0.58 * h, 0.0), 0.3 * w));
    let small = uv_sphere(12, 8).apply_pose(&place(Vec3::new(0.32 * w, 0.32 * h, 0.35 * w), 0.12 * w));
    let mesh = concat(&[big, small]);
    let light = LightSpec::directional(Vec3::new(-0.45, -0.45, 0.77).normalize(), 1.0).expect("unit light");
    (MeshScene::new(mesh, Pose::identity(), width, height), light)
}

/// Two vertical shadow borders of different contrast: a lit middle band at
/// `lit`, a left shadow at `lit - 2h` and a right shadow at `lit - h`.
#[derive(Debug, Clone)]
pub struct TwoStep {
    pub luminance: ImagePlane,
    pub mask: ShadowMask,
    /// First lit column and first column of the right shadow.
    pub edges: (usize, usize),
}

pub fn two_step(width: usize, height: usize, lit: f64, h: f64) -> TwoStep {
    let e0 = width * 5 / 16;
    let e1 = width * 11 / 16;
    let luminance = ImagePlane::from_fn(width, height, |x, _| {
        if x < e0 {
            lit - 2.0 * h
        } else if x < e1 {
            lit
        } else {
            lit - h
        }
    })
    .expect("non-empty");
    let plane = ImagePlane::from_fn(width, height, |x, _| if (e0..e1).contains(&x) { 1.0 } else { 0.0 })
        .expect("non-empty");
    let mask = ShadowMask::new(plane, ImagePlane::filled(width, height, 1.0).expect("non-empty")).expect("binary");
    TwoStep {
        luminance,
        mask,
        edges: (e0, e1),
    }
}

/// Mildly textured skin-toned albedo, reproducible from `seed`.
pub fn albedo(width: usize, height: usize, seed: u64) -> ColorImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = [0.85, 0.66, 0.55];
    let mut planes = [Vec::new(), Vec::new(), Vec::new()];
    for _ in 0..width * height {
        let n: f64 = rng.random_range(-0.04..0.04);
        for c in 0..3 {
            planes[c].push((base[c] + n).clamp(0.0, 1.0));
        }
    }
    let [r, g, b] = planes.map(|d| ImagePlane::new(width, height, d).expect("sized"));
    ColorImage::new(ColorSpace::Rgb, [r, g, b]).expect("same dims")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_level_three_has_1280_triangles() {
        let s = icosphere(3);
        assert_eq!(s.triangles().len(), 1280);
        assert_eq!(s.positions().len(), 642);
    }

    #[test]
    fn uv_sphere_has_equator_ring() {
        let s = uv_sphere(16, 12);
        assert_eq!(s.triangles().len(), 2 * 16 * 11);
        assert_eq!(s.positions().iter().filter(|p| p.z == 0.0).count(), 16);
    }

    #[test]
    fn albedo_is_reproducible() {
        assert_eq!(albedo(8, 8, 7), albedo(8, 8, 7));
        assert_ne!(albedo(8, 8, 7), albedo(8, 8, 8));
    }

    #[test]
    fn two_step_layout() {
        let t = two_step(128, 16, 0.8, 0.2);
        assert_eq!(t.edges, (40, 88));
        assert!((t.luminance.get(0, 0) - 0.4).abs() < 1e-12);
        assert!((t.luminance.get(127, 0) - 0.6).abs() < 1e-12);
    }
}
