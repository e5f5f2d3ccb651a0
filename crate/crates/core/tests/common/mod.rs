//! Brute-force reference implementations shared by integration tests.
#![allow(dead_code)]

use shadow_relight::image::ImagePlane;
use shadow_relight::mesh::{camera_z, rasterize_with, GBuffer, Hit, Ray, TriMesh, Vec3};
use shadow_relight::shadow::{
    classify_pixel, feeler_ray, mask_from_classes, occluder_counts, FeelerConfig, LightSpec, ShadowMask,
    DEFAULT_FEELER_OFFSET,
};

/// Nearest hit by testing every triangle; equal `t` keeps the lower index.
pub fn nearest_exhaustive(mesh: &TriMesh, ray: &Ray, t_min: f64, t_max: f64) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for tri in 0..mesh.triangles().len() as u32 {
        if let Some(h) = mesh.intersect_triangle(ray, tri, t_min, t_max) {
            if best.as_ref().is_none_or(|b| h.t < b.t) {
                best = Some(h);
            }
        }
    }
    best
}

pub fn occluded_exhaustive(mesh: &TriMesh, ray: &Ray, t_min: f64, t_max: f64, accept: impl Fn(u32) -> bool) -> bool {
    (0..mesh.triangles().len() as u32)
        .any(|tri| accept(tri) && mesh.intersect_triangle(ray, tri, t_min, t_max).is_some())
}

pub fn gbuffer_exhaustive(mesh: &TriMesh, width: usize, height: usize) -> GBuffer {
    rasterize_with(width, height, camera_z(mesh), |ray| nearest_exhaustive(mesh, ray, 0.0, f64::INFINITY)).unwrap()
}

/// Shadow mask where both primary and feeler rays test every triangle.
pub fn mask_exhaustive(mesh: &TriMesh, width: usize, height: usize, light: &LightSpec) -> (GBuffer, ShadowMask) {
    let g = gbuffer_exhaustive(mesh, width, height);
    let config = FeelerConfig::for_mesh(mesh, DEFAULT_FEELER_OFFSET);
    let mut classes = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            classes.push(
                classify_pixel(&g, x, y, light, |p, origin| {
                    let (ray, t_max) = feeler_ray(p, light, config)?;
                    if t_max <= 0.0 {
                        return Ok(false);
                    }
                    Ok(occluded_exhaustive(mesh, &ray, 0.0, t_max, |tri| {
                        occluder_counts(mesh, origin, tri, &ray.direction)
                    }))
                })
                .unwrap(),
            );
        }
    }
    let mask = mask_from_classes(&g, &classes).unwrap();
    (g, mask)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Real SH basis written out independently of the library.
pub fn sh9(d: &Vec3) -> [f64; 9] {
    let pi = std::f64::consts::PI;
    let (x, y, z) = (d.x, d.y, d.z);
    let c0 = (1.0 / (4.0 * pi)).sqrt();
    let c1 = (3.0 / (4.0 * pi)).sqrt();
    let c2 = (15.0 / (4.0 * pi)).sqrt();
    let c20 = (5.0 / (16.0 * pi)).sqrt();
    let c22 = (15.0 / (16.0 * pi)).sqrt();
    [c0, c1 * y, c1 * z, c1 * x, c2 * x * y, c2 * y * z, c20 * (3.0 * z * z - 1.0), c2 * x * z, c22 * (x * x - y * y)]
}

/// `∫ L(ω) max(0, n·ω) dω` for the radiance `L = Σ c_i Y_i`, integrated over
/// the hemisphere around `n` with Gauss-Legendre in `cos θ` and a uniform
/// rule in `φ`.
pub fn irradiance_quadrature(coeffs: &[f64; 9], n: &Vec3) -> f64 {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let t1 = n.cross(&helper).normalize();
    let t2 = n.cross(&t1);
    let phis = 64;
    let mut e = 0.0;
    for (node, weight) in gauss_legendre(24) {
        let mu = 0.5 * (node + 1.0);
        let w_mu = 0.5 * weight;
        let s = (1.0 - mu * mu).max(0.0).sqrt();
        for k in 0..phis {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / phis as f64;
            let w = s * phi.cos() * t1 + s * phi.sin() * t2 + mu * n;
            let radiance: f64 = sh9(&w).iter().zip(coeffs).map(|(y, c)| y * c).sum();
            e += w_mu * (2.0 * std::f64::consts::PI / phis as f64) * radiance * mu;
        }
    }
    e
}

/// `n` points spread evenly over the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// A one-row G-buffer whose covered pixels carry the given normals.
pub fn normal_strip(normals: &[Vec3]) -> GBuffer {
    let n = normals.len();
    let row = |f: &dyn Fn(&Vec3) -> f64| ImagePlane::new(n, 1, normals.iter().map(f).collect()).unwrap();
    GBuffer {
        hit_mask: ImagePlane::filled(n, 1, 1.0).unwrap(),
        normal: [row(&|v| v.x), row(&|v| v.y), row(&|v| v.z)],
        depth: ImagePlane::zeros(n, 1).unwrap(),
        position: [row(&|_| 0.0), row(&|_| 0.0), row(&|_| 0.0)],
        triangle: vec![0; n],
    }
}
