//! Python bindings: planes, images, meshes, lights, shadow masks, SH
//! lighting, border weights, relighting and metrics.

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use shadow_relight as sr;
use sr::border::{BorderParams, ContrastSource, WeightMap};
use sr::image::{ColorImage, ImagePlane};
use sr::lighting::AmbientMode;
use sr::mesh::{Pose, TriMesh, Vec3};
use sr::relight::{AmbientSource, LightInput, RatioImage, RelightConfig};
use sr::shadow::LightSpec;

create_exception!(shadow_relight, ShadowRelightError, PyValueError);

fn err(e: sr::Error) -> PyErr {
    match e {
        sr::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => ShadowRelightError::new_err(format!("{}: {other}", other.kind())),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for sr::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn ambient_mode(name: &str) -> PyResult<AmbientMode> {
    match name {
        "direct" => Ok(AmbientMode::Direct),
        "irradiance" => Ok(AmbientMode::Irradiance),
        other => Err(ShadowRelightError::new_err(format!("unknown ambient mode {other:?}"))),
    }
}

/// A single-channel float raster in row-major order.
#[pyclass(module = "shadow_relight", name = "Plane", skip_from_py_object)]
#[derive(Clone)]
struct Plane {
    inner: ImagePlane,
}

impl Plane {
    fn wrap(inner: ImagePlane) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl Plane {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f64>) -> PyResult<Self> {
        Ok(Self::wrap(ImagePlane::new(width, height, data).py()?))
    }

    #[staticmethod]
    fn filled(width: usize, height: usize, value: f64) -> PyResult<Self> {
        Ok(Self::wrap(ImagePlane::filled(width, height, value).py()?))
    }

    /// Reads a `.pfm` plane, or the luminance of a `.png`.
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self::wrap(sr::io::read_plane(path).py()?))
    }

    fn write_pfm(&self, path: &str) -> PyResult<()> {
        sr::io::write_pfm(path, &self.inner).py()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<f64> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(ShadowRelightError::new_err(format!("pixel ({x}, {y}) is outside the plane")));
        }
        Ok(self.inner.get(x, y))
    }

    fn min(&self) -> f64 {
        self.inner.min()
    }

    fn max(&self) -> f64 {
        self.inner.max()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Plane({}x{})", self.inner.width(), self.inner.height())
    }
}

/// An RGB image with float channels in [0, 1].
#[pyclass(module = "shadow_relight", name = "Image", skip_from_py_object)]
#[derive(Clone)]
struct Image {
    inner: ColorImage,
}

#[pymethods]
impl Image {
    /// Builds an image from interleaved `r, g, b` samples.
    #[staticmethod]
    fn from_rgb(width: usize, height: usize, rgb: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: ColorImage::from_interleaved_rgb(width, height, &rgb).py()?,
        })
    }

    #[staticmethod]
    fn read_png(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: sr::io::read_png(path).py()?,
        })
    }

    fn write_png(&self, path: &str) -> PyResult<()> {
        sr::io::write_png(path, &self.inner).py()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn to_rgb(&self) -> Vec<f64> {
        self.inner.to_interleaved()
    }

    fn channel(&self, index: usize) -> PyResult<Plane> {
        if index > 2 {
            return Err(ShadowRelightError::new_err("channel index must be 0, 1 or 2"));
        }
        Ok(Plane::wrap(self.inner.channel(index).clone()))
    }

    fn luminance(&self) -> PyResult<Plane> {
        Ok(Plane::wrap(sr::image::luminance(&self.inner).py()?))
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.width(), self.inner.height())
    }
}

#[pyclass(module = "shadow_relight", name = "Mesh", skip_from_py_object)]
#[derive(Clone)]
struct Mesh {
    inner: TriMesh,
}

#[pymethods]
impl Mesh {
    #[new]
    #[pyo3(signature = (positions, triangles, normals=None))]
    fn new(positions: Vec<[f64; 3]>, triangles: Vec<[u32; 3]>, normals: Option<Vec<[f64; 3]>>) -> PyResult<Self> {
        let positions = positions.into_iter().map(vec3).collect();
        let normals = normals.map(|n| n.into_iter().map(vec3).collect());
        Ok(Self {
            inner: TriMesh::new(positions, normals, triangles).py()?,
        })
    }

    #[staticmethod]
    fn load_obj(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: sr::mesh::load_obj(path).py()?,
        })
    }

    /// Unit UV sphere scaled to `radius` pixels and centred in the image.
    #[staticmethod]
    fn sphere(width: usize, height: usize, radius: f64) -> Self {
        Self {
            inner: sr::synth::sphere_scene(width, height, radius).mesh,
        }
    }

    /// Applies a pose given as JSON (`rotation`/`translation`/`scale` or a 4x4 `matrix`).
    fn posed(&self, pose_json: &str) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.apply_pose(&Pose::from_json(pose_json).py()?),
        })
    }

    fn to_obj(&self) -> String {
        sr::mesh::format_obj(&self.inner)
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.positions().len()
    }

    #[getter]
    fn triangle_count(&self) -> usize {
        self.inner.triangles().len()
    }

    fn centroid(&self) -> [f64; 3] {
        let c = self.inner.centroid();
        [c.x, c.y, c.z]
    }

    fn __repr__(&self) -> String {
        format!("Mesh({} vertices, {} triangles)", self.vertex_count(), self.triangle_count())
    }
}

#[pyclass(module = "shadow_relight", name = "Light", skip_from_py_object)]
#[derive(Clone)]
struct Light {
    inner: LightSpec,
}

#[pymethods]
impl Light {
    #[staticmethod]
    fn directional(direction: [f64; 3], intensity: f64) -> PyResult<Self> {
        Ok(Self {
            inner: LightSpec::directional(vec3(direction), intensity).py()?,
        })
    }

    #[staticmethod]
    fn point(position: [f64; 3], intensity: f64) -> PyResult<Self> {
        Ok(Self {
            inner: LightSpec::point(vec3(position), intensity).py()?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: LightSpec::from_json(text).py()?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Light({})", self.inner.to_json())
    }
}

/// Orthographic per-pixel geometry of a posed mesh.
#[pyclass(module = "shadow_relight", name = "GBuffer")]
struct GBuffer {
    inner: sr::mesh::GBuffer,
}

#[pymethods]
impl GBuffer {
    #[staticmethod]
    fn rasterize(py: Python<'_>, mesh: PyRef<'_, Mesh>, width: usize, height: usize) -> PyResult<Self> {
        let mesh = mesh.inner.clone();
        let inner = py.detach(|| sr::mesh::rasterize_geometry(&mesh, width, height)).py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn coverage(&self) -> Plane {
        Plane::wrap(self.inner.hit_mask.clone())
    }

    #[getter]
    fn depth(&self) -> Plane {
        Plane::wrap(self.inner.depth.clone())
    }

    /// Normal components as three planes.
    #[getter]
    fn normals(&self) -> (Plane, Plane, Plane) {
        let [x, y, z] = self.inner.normal.clone();
        (Plane::wrap(x), Plane::wrap(y), Plane::wrap(z))
    }
}

#[pyclass(module = "shadow_relight", name = "ShadowMask", skip_from_py_object)]
#[derive(Clone)]
struct ShadowMask {
    inner: sr::shadow::ShadowMask,
}

#[pymethods]
impl ShadowMask {
    /// Self- and cast-shadow mask of `mesh` under `light` over the G-buffer.
    #[staticmethod]
    fn compute(py: Python<'_>, gbuffer: PyRef<'_, GBuffer>, mesh: PyRef<'_, Mesh>, light: PyRef<'_, Light>) -> PyResult<Self> {
        let (g, m, l) = (&gbuffer.inner, &mesh.inner, light.inner);
        let inner = py.detach(|| sr::shadow::shadow_mask(g, m, &l)).py()?;
        Ok(Self { inner })
    }

    /// Thresholds a plane at 0.5; everything is covered without `coverage`.
    #[staticmethod]
    #[pyo3(signature = (plane, coverage=None))]
    fn from_plane(plane: PyRef<'_, Plane>, coverage: Option<PyRef<'_, Plane>>) -> PyResult<Self> {
        let cov = coverage.as_ref().map(|c| &c.inner);
        Ok(Self {
            inner: sr::shadow::ShadowMask::from_threshold(&plane.inner, cov).py()?,
        })
    }

    #[getter]
    fn plane(&self) -> Plane {
        Plane::wrap(self.inner.plane().clone())
    }

    #[getter]
    fn coverage(&self) -> Plane {
        Plane::wrap(self.inner.coverage().clone())
    }

    fn shadow_count(&self) -> usize {
        self.inner.shadow_count()
    }

    fn is_lit(&self, x: usize, y: usize) -> bool {
        self.inner.is_lit(x, y)
    }

    fn __repr__(&self) -> String {
        format!(
            "ShadowMask({}x{}, {} shadow pixels)",
            self.inner.width(),
            self.inner.height(),
            self.inner.shadow_count()
        )
    }
}

/// Order-2 spherical-harmonics lighting with an ambient term.
#[pyclass(module = "shadow_relight", name = "ShLighting", skip_from_py_object)]
#[derive(Clone)]
struct ShLighting {
    inner: sr::lighting::ShLighting,
}

#[pymethods]
impl ShLighting {
    #[new]
    fn new(coeffs: [f64; 9]) -> Self {
        Self {
            inner: sr::lighting::ShLighting::from_coeffs(coeffs),
        }
    }

    /// Projects a light seen from `centroid` onto the SH basis.
    #[staticmethod]
    #[pyo3(signature = (light, centroid=[0.0, 0.0, 0.0]))]
    fn from_light(light: PyRef<'_, Light>, centroid: [f64; 3]) -> PyResult<Self> {
        Ok(Self {
            inner: sr::lighting::project_light(&light.inner, &vec3(centroid)).py()?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (text, centroid=[0.0, 0.0, 0.0]))]
    fn from_json(text: &str, centroid: [f64; 3]) -> PyResult<Self> {
        Ok(Self {
            inner: sr::lighting::ShLighting::from_json(text, &vec3(centroid)).py()?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn coeffs(&self) -> [f64; 9] {
        self.inner.coeffs
    }

    #[getter]
    fn ambient(&self) -> f64 {
        self.inner.ambient
    }

    /// Copy with ambient `a` folded into the constant coefficient.
    #[pyo3(signature = (a, mode="direct"))]
    fn with_ambient(&self, a: f64, mode: &str) -> PyResult<Self> {
        let mut base = self.inner;
        base.mode = ambient_mode(mode)?;
        Ok(Self {
            inner: sr::lighting::inject_ambient(&base, a).py()?,
        })
    }

    #[pyo3(signature = (gbuffer, mask=None))]
    fn shade(&self, gbuffer: PyRef<'_, GBuffer>, mask: Option<PyRef<'_, ShadowMask>>) -> PyResult<Plane> {
        let mask = mask.as_ref().map(|m| &m.inner);
        Ok(Plane::wrap(sr::lighting::shade(&gbuffer.inner, &self.inner, mask).py()?))
    }

    fn __repr__(&self) -> String {
        format!("ShLighting({:?}, ambient={})", self.inner.coeffs, self.inner.ambient)
    }
}

#[pyfunction]
fn estimate_ambient(luminance: PyRef<'_, Plane>, mask: PyRef<'_, ShadowMask>) -> PyResult<f64> {
    sr::lighting::estimate_ambient(&luminance.inner, &mask.inner).py()
}

#[allow(clippy::too_many_arguments)]
fn border_params(
    window: usize,
    tau1: f64,
    tau2: f64,
    sigma_max: f64,
    r_max: usize,
    contrast_source: &str,
) -> PyResult<BorderParams> {
    let contrast_source = match contrast_source {
        "luminance" => ContrastSource::Luminance,
        "mask" => ContrastSource::Mask,
        other => return Err(ShadowRelightError::new_err(format!("unknown contrast source {other:?}"))),
    };
    let p = BorderParams {
        window,
        tau1,
        tau2,
        sigma_max,
        r_max,
        contrast_source,
    };
    p.validate().py()?;
    Ok(p)
}

/// Shadow-border weight map; `luminance` supplies the local contrast.
#[pyfunction]
#[pyo3(signature = (mask, luminance, window=21, tau1=0.02, tau2=0.98, sigma_max=0.25, r_max=10, contrast_source="luminance"))]
#[allow(clippy::too_many_arguments)]
fn border_weights(
    py: Python<'_>,
    mask: PyRef<'_, ShadowMask>,
    luminance: PyRef<'_, Plane>,
    window: usize,
    tau1: f64,
    tau2: f64,
    sigma_max: f64,
    r_max: usize,
    contrast_source: &str,
) -> PyResult<Plane> {
    let params = border_params(window, tau1, tau2, sigma_max, r_max, contrast_source)?;
    let (m, l) = (&mask.inner, &luminance.inner);
    let w = py.detach(|| sr::border::border_weights(m, l, &params)).py()?;
    Ok(Plane::wrap(w.plane().clone()))
}

/// Relights `source` from one light to another. Returns a dict with the
/// relit image, the ratio, both masks and shadings, and (unless
/// `weights=False`) both border weight maps.
#[pyfunction]
#[pyo3(signature = (source, mesh, source_light, target_light, ambient=None, ambient_default=None, target_ambient=None, ambient_mode="direct", epsilon=1e-3, weights=true))]
#[allow(clippy::too_many_arguments)]
fn relight<'py>(
    py: Python<'py>,
    source: PyRef<'_, Image>,
    mesh: PyRef<'_, Mesh>,
    source_light: PyRef<'_, Light>,
    target_light: PyRef<'_, Light>,
    ambient: Option<f64>,
    ambient_default: Option<f64>,
    target_ambient: Option<f64>,
    ambient_mode: &str,
    epsilon: f64,
    weights: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let config = RelightConfig {
        ambient: match ambient {
            Some(a) => AmbientSource::Fixed(a),
            None => AmbientSource::Estimate {
                default: ambient_default,
            },
        },
        target_ambient,
        ambient_mode: self::ambient_mode(ambient_mode)?,
        epsilon,
        border: weights.then(BorderParams::default),
        ..Default::default()
    };
    let (img, m) = (&source.inner, &mesh.inner);
    let (sl, tl) = (LightInput::from(source_light.inner), LightInput::from(target_light.inner));
    let out = py
        .detach(|| {
            let g = sr::mesh::rasterize_geometry(m, img.width(), img.height())?;
            sr::relight::relight(img, &g, m, &sl, &tl, &config)
        })
        .py()?;

    let d = PyDict::new(py);
    d.set_item("relit", Image { inner: out.relit })?;
    d.set_item("ratio", Plane::wrap(out.ratio.plane().clone()))?;
    d.set_item("source_mask", ShadowMask { inner: out.source_mask })?;
    d.set_item("target_mask", ShadowMask { inner: out.target_mask })?;
    d.set_item("source_shading", Plane::wrap(out.source_shading))?;
    d.set_item("target_shading", Plane::wrap(out.target_shading))?;
    d.set_item("source_lighting", ShLighting { inner: out.source_lighting })?;
    d.set_item("target_lighting", ShLighting { inner: out.target_lighting })?;
    d.set_item("source_weights", out.source_weights.map(|w| Plane::wrap(w.plane().clone())))?;
    d.set_item("target_weights", out.target_weights.map(|w| Plane::wrap(w.plane().clone())))?;
    Ok(d)
}

#[pyfunction]
fn rgb_to_yuv(rgb: [f64; 3]) -> [f64; 3] {
    sr::image::rgb_to_yuv_pixel(rgb)
}

#[pyfunction]
fn yuv_to_rgb(yuv: [f64; 3]) -> [f64; 3] {
    sr::image::yuv_to_rgb_pixel(yuv)
}

#[pyfunction]
#[pyo3(signature = (plane, gamma=sr::image::DEFAULT_GAMMA))]
fn gamma_encode(plane: PyRef<'_, Plane>, gamma: f64) -> PyResult<Plane> {
    Ok(Plane::wrap(sr::image::gamma_encode(&plane.inner, gamma).py()?))
}

#[pyfunction]
#[pyo3(signature = (plane, gamma=sr::image::DEFAULT_GAMMA))]
fn gamma_decode(plane: PyRef<'_, Plane>, gamma: f64) -> PyResult<Plane> {
    Ok(Plane::wrap(sr::image::gamma_decode(&plane.inner, gamma).py()?))
}

fn ratio(p: &Plane) -> PyResult<RatioImage> {
    RatioImage::from_plane(p.inner.clone()).py()
}

#[pyfunction]
fn mse(a: PyRef<'_, Image>, b: PyRef<'_, Image>) -> PyResult<f64> {
    sr::metrics::mse(&a.inner, &b.inner).py()
}

/// Returns `(error, scale)`.
#[pyfunction]
fn si_mse(a: PyRef<'_, Image>, b: PyRef<'_, Image>) -> PyResult<(f64, f64)> {
    let r = sr::metrics::si_mse(&a.inner, &b.inner).py()?;
    Ok((r.error, r.scale))
}

#[pyfunction]
fn ssim(a: PyRef<'_, Plane>, b: PyRef<'_, Plane>) -> PyResult<f64> {
    sr::metrics::ssim(&a.inner, &b.inner).py()
}

#[pyfunction]
fn dssim(a: PyRef<'_, Plane>, b: PyRef<'_, Plane>) -> PyResult<f64> {
    sr::metrics::dssim(&a.inner, &b.inner).py()
}

#[pyfunction]
fn l_ratio(pred: PyRef<'_, Plane>, truth: PyRef<'_, Plane>) -> PyResult<f64> {
    sr::metrics::l_ratio(&ratio(&pred)?, &ratio(&truth)?).py()
}

#[pyfunction]
fn l_border(pred: PyRef<'_, Plane>, truth: PyRef<'_, Plane>, weights: PyRef<'_, Plane>) -> PyResult<f64> {
    let w = WeightMap {
        plane: weights.inner.clone(),
    };
    sr::metrics::l_border(&ratio(&pred)?, &ratio(&truth)?, &w).py()
}

#[pyfunction]
fn l_gradient(pred: PyRef<'_, Plane>, truth: PyRef<'_, Plane>) -> PyResult<f64> {
    sr::metrics::l_gradient(&ratio(&pred)?, &ratio(&truth)?).py()
}

#[pymodule]
#[pyo3(name = "shadow_relight")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ShadowRelightError", m.py().get_type::<ShadowRelightError>())?;
    m.add_class::<Plane>()?;
    m.add_class::<Image>()?;
    m.add_class::<Mesh>()?;
    m.add_class::<Light>()?;
    m.add_class::<GBuffer>()?;
    m.add_class::<ShadowMask>()?;
    m.add_class::<ShLighting>()?;
    m.add_function(wrap_pyfunction!(estimate_ambient, m)?)?;
    m.add_function(wrap_pyfunction!(border_weights, m)?)?;
    m.add_function(wrap_pyfunction!(relight, m)?)?;
    m.add_function(wrap_pyfunction!(rgb_to_yuv, m)?)?;
    m.add_function(wrap_pyfunction!(yuv_to_rgb, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_encode, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_decode, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(si_mse, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(dssim, m)?)?;
    m.add_function(wrap_pyfunction!(l_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(l_border, m)?)?;
    m.add_function(wrap_pyfunction!(l_gradient, m)?)?;
    Ok(())
}
