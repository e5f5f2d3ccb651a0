mod common;

use common::{fibonacci_sphere, irradiance_quadrature, normal_strip, sh9};
use shadow_relight::lighting::{inject_ambient, project_light, sh_basis, shade, AmbientMode, ShLighting};
use shadow_relight::mesh::Vec3;
use shadow_relight::shadow::LightSpec;

#[test]
fn basis_matches_closed_form() {
    for d in fibonacci_sphere(200) {
        let a = sh_basis(&d).unwrap();
        let b = sh9(&d);
        for i in 0..9 {
            assert!((a[i] - b[i]).abs() < 1e-14);
        }
    }
}

#[test]
fn basis_is_orthonormal_under_quadrature() {
    // Integrating Y_i Y_j over the sphere with a product rule.
    let mut gram = [[0.0; 9]; 9];
    let nodes = common::gauss_legendre(20);
    let phis = 40;
    for (z, w) in &nodes {
        let r = (1.0 - z * z).sqrt();
        for k in 0..phis {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / phis as f64;
            let d = Vec3::new(r * phi.cos(), r * phi.sin(), *z);
            let y = sh_basis(&d).unwrap();
            for i in 0..9 {
                for j in 0..9 {
                    gram[i][j] += w * (2.0 * std::f64::consts::PI / phis as f64) * y[i] * y[j];
                }
            }
        }
    }
    for i in 0..9 {
        for j in 0..9 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((gram[i][j] - want).abs() < 1e-12, "{i} {j}: {}", gram[i][j]);
        }
    }
}

#[test]
fn shading_matches_hemisphere_integral() {
    // Tetrahedral lights keep the order-2 irradiance positive everywhere, so
    // the clamp in shading never engages.
    let lights = [
        (Vec3::new(1.0, 1.0, 1.0), 1.0),
        (Vec3::new(1.0, -1.0, -1.0), 0.9),
        (Vec3::new(-1.0, 1.0, -1.0), 0.8),
        (Vec3::new(-1.0, -1.0, 1.0), 0.7),
    ];
    let mut lighting = ShLighting::zero();
    for (d, i) in lights {
        let p = project_light(&LightSpec::directional(d.normalize(), i).unwrap(), &Vec3::zeros()).unwrap();
        for k in 0..9 {
            lighting.coeffs[k] += p.coeffs[k];
        }
    }
    lighting.mode = AmbientMode::Irradiance;
    let lighting = inject_ambient(&lighting, 0.2).unwrap();
    let normals = fibonacci_sphere(1000);
    let directional = lighting.directional();
    assert!(normals.iter().all(|n| shadow_relight::lighting::irradiance(&directional, n) > 0.0));
    let shaded = shade(&normal_strip(&normals), &lighting, None).unwrap();
    let mut worst: f64 = 0.0;
    for (i, n) in normals.iter().enumerate() {
        worst = worst.max((shaded.get(i, 0) - irradiance_quadrature(&lighting.coeffs, n)).abs());
    }
    assert!(worst < 1e-4, "max deviation {worst}");
}

#[test]
fn frontal_light_value_from_quadrature() {
    let c = sh_basis(&Vec3::z()).unwrap();
    assert!((irradiance_quadrature(&c, &Vec3::z()) - 1.0625).abs() < 1e-9);
    assert!((irradiance_quadrature(&c, &-Vec3::z()) - 0.0625).abs() < 1e-9);
}
