use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use shadow_relight::border::{border_weights_detailed, WeightMap, WEIGHT_CAP};
use shadow_relight::image::{gamma_encode, ColorImage, ImagePlane, DEFAULT_GAMMA};
use shadow_relight::io::{read_plane, read_png, write_pfm, write_png, write_png_gray};
use shadow_relight::lighting::{estimate_ambient, inject_ambient, project_light, shade, AmbientMode, ShLighting};
use shadow_relight::mesh::{load_obj, rasterize_geometry, write_obj, Pose, TriMesh, Vec3};
use shadow_relight::metrics::{aggregate, evaluate, EvalExtras, ImageEntry, MetricChannels};
use shadow_relight::relight::{render_photo, AmbientSource, LightInput, RatioImage, RelightConfig};
use shadow_relight::shadow::{self, shadow_mask_with, FeelerConfig, LightSpec, ShadowMask};
use shadow_relight::{synth, Error, Result};

use crate::output::{check_overwrite, read_text, require_inputs, sha256_file, write_json, write_text, OutDir, Policy};
use crate::{AmbientArgs, AmbientModeArg, BorderWeightsArgs, EvalArgs, RelightArgs, Scene, ShadowMaskArgs, SynthArgs};

fn load_mesh(mesh: &Path, pose: Option<&PathBuf>) -> Result<TriMesh> {
    let mesh = load_obj(mesh)?;
    Ok(match pose {
        Some(p) => mesh.apply_pose(&Pose::from_json(&read_text(p)?)?),
        None => mesh,
    })
}

fn load_light(path: &Path) -> Result<LightSpec> {
    LightSpec::from_json(&read_text(path)?)
}

fn load_mask(mask: &Path, coverage: Option<&PathBuf>) -> Result<ShadowMask> {
    let plane = read_plane(mask)?;
    let coverage = coverage.map(read_plane).transpose()?;
    ShadowMask::from_threshold(&plane, coverage.as_ref())
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string(v).expect("json value serializes"));
}

fn write_weights(out: &OutDir, stem: &str, w: &WeightMap) -> Result<()> {
    write_pfm(out.path(&format!("{stem}.pfm")), w.plane())?;
    write_png_gray(out.path(&format!("{stem}_vis.png")), w.plane(), 1.0 / WEIGHT_CAP)
}

pub fn shadow_mask(a: &ShadowMaskArgs, policy: Policy) -> Result<()> {
    require_inputs([a.mesh.as_path(), a.light.as_path()].into_iter().chain(a.pose.as_deref()))?;
    if !(a.feeler_offset > 0.0 && a.feeler_offset.is_finite()) {
        return Err(Error::Parameter(format!("feeler offset must be > 0, got {}", a.feeler_offset)));
    }
    let out = OutDir::prepare(
        &a.out,
        &["mask.png", "mask.pfm", "coverage.pfm", "depth.pfm", "normal_x.pfm", "normal_y.pfm", "normal_z.pfm"],
        policy,
    )?;
    let mesh = load_mesh(&a.mesh, a.pose.as_ref())?;
    let light = load_light(&a.light)?;
    let (w, h) = a.size;
    let g = rasterize_geometry(&mesh, w, h)?;
    let mask = shadow_mask_with(&g, &mesh, &light, FeelerConfig::for_mesh(&mesh, a.feeler_offset))?;

    write_png_gray(out.path("mask.png"), mask.plane(), 1.0)?;
    write_pfm(out.path("mask.pfm"), mask.plane())?;
    write_pfm(out.path("coverage.pfm"), &g.hit_mask)?;
    write_pfm(out.path("depth.pfm"), &g.depth)?;
    for (i, axis) in ["x", "y", "z"].iter().enumerate() {
        write_pfm(out.path(&format!("normal_{axis}.pfm")), &g.normal[i])?;
    }
    let covered = g.hit_mask.data().iter().filter(|&&v| v == 1.0).count();
    print_json(&json!({ "covered": covered, "shadow": mask.shadow_count() }));
    Ok(())
}

pub fn border_weights(a: &BorderWeightsArgs, policy: Policy) -> Result<()> {
    require_inputs([a.mask.as_path(), a.luminance.as_path()].into_iter().chain(a.coverage.as_deref()))?;
    let params = a.border.resolve()?;
    let out = OutDir::prepare(&a.out, &["weights.pfm", "weights_vis.png"], policy)?;
    let mask = load_mask(&a.mask, a.coverage.as_ref())?;
    let y = read_plane(&a.luminance)?.map(|v| v.max(0.0));
    let analysis = border_weights_detailed(&mask, &gamma_encode(&y, DEFAULT_GAMMA)?, &params)?;
    write_weights(&out, "weights", &analysis.weights)?;
    print_json(&json!({
        "border_pixels": analysis.border.len(),
        "t_max": analysis.border.t_max,
        "max_weight": analysis.weights.plane().max(),
    }));
    Ok(())
}

pub fn ambient(a: &AmbientArgs, policy: Policy) -> Result<()> {
    require_inputs([a.image.as_path(), a.mask.as_path()].into_iter().chain(a.coverage.as_deref()))?;
    if let Some(out) = &a.out {
        check_overwrite([out.clone()], policy)?;
    }
    let mask = load_mask(&a.mask, a.coverage.as_ref())?;
    let y = read_plane(&a.image)?;
    let ambient = match (estimate_ambient(&y, &mask), a.ambient_default) {
        (Err(Error::NoShadowPixels), Some(d)) => d,
        (r, _) => r?,
    };
    let v = json!({ "ambient": ambient, "shadow_pixels": mask.shadow_count() });
    if let Some(out) = &a.out {
        write_json(out, &v)?;
    }
    print_json(&v);
    Ok(())
}

const RELIGHT_OUTPUTS: &[&str] = &[
    "relit.png",
    "ratio.pfm",
    "source_mask.png",
    "source_mask.pfm",
    "target_mask.png",
    "target_mask.pfm",
    "coverage.pfm",
    "source_shading.pfm",
    "target_shading.pfm",
    "source_weights.pfm",
    "source_weights_vis.png",
    "target_weights.pfm",
    "target_weights_vis.png",
    "manifest.json",
];

pub fn relight(a: &RelightArgs, policy: Policy) -> Result<()> {
    let inputs: Vec<(&str, &Path)> = [
        ("source", a.source.as_path()),
        ("mesh", a.mesh.as_path()),
        ("source_light", a.source_light.as_path()),
        ("target_light", a.target_light.as_path()),
    ]
    .into_iter()
    .chain(a.pose.as_deref().map(|p| ("pose", p)))
    .collect();
    require_inputs(inputs.iter().map(|(_, p)| *p))?;
    for v in [a.ambient, a.ambient_default, a.target_ambient].into_iter().flatten() {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("ambient values must be >= 0, got {v}")));
        }
    }
    if !(a.epsilon > 0.0 && a.epsilon.is_finite()) {
        return Err(Error::Parameter(format!("epsilon must be > 0, got {}", a.epsilon)));
    }
    let border = if a.no_weights { None } else { Some(a.border.resolve()?) };
    let names: Vec<&str> = RELIGHT_OUTPUTS
        .iter()
        .copied()
        .filter(|n| border.is_some() || !n.contains("weights"))
        .collect();
    let out = OutDir::prepare(&a.out, &names, policy)?;

    let source = read_png(&a.source)?;
    let mesh = load_mesh(&a.mesh, a.pose.as_ref())?;
    let source_light = load_light(&a.source_light)?;
    let target_light = load_light(&a.target_light)?;
    let g = rasterize_geometry(&mesh, source.width(), source.height())?;
    let config = RelightConfig {
        ambient: match a.ambient {
            Some(v) => AmbientSource::Fixed(v),
            None => AmbientSource::Estimate { default: a.ambient_default },
        },
        target_ambient: a.target_ambient,
        ambient_mode: match a.ambient_mode {
            AmbientModeArg::Direct => AmbientMode::Direct,
            AmbientModeArg::Irradiance => AmbientMode::Irradiance,
        },
        epsilon: a.epsilon,
        gamma: DEFAULT_GAMMA,
        border,
    };
    let r = shadow_relight::relight::relight(
        &source,
        &g,
        &mesh,
        &LightInput::from(source_light),
        &LightInput::from(target_light),
        &config,
    )?;

    write_png(out.path("relit.png"), &r.relit)?;
    write_pfm(out.path("ratio.pfm"), r.ratio.plane())?;
    for (stem, mask) in [("source_mask", &r.source_mask), ("target_mask", &r.target_mask)] {
        write_png_gray(out.path(&format!("{stem}.png")), mask.plane(), 1.0)?;
        write_pfm(out.path(&format!("{stem}.pfm")), mask.plane())?;
    }
    write_pfm(out.path("coverage.pfm"), &g.hit_mask)?;
    write_pfm(out.path("source_shading.pfm"), &r.source_shading)?;
    write_pfm(out.path("target_shading.pfm"), &r.target_shading)?;
    if let (Some(ws), Some(wt)) = (&r.source_weights, &r.target_weights) {
        write_weights(&out, "source_weights", ws)?;
        write_weights(&out, "target_weights", wt)?;
    }

    let mut hashed = serde_json::Map::new();
    for (name, path) in &inputs {
        hashed.insert(
            name.to_string(),
            json!({ "path": path.display().to_string(), "sha256": sha256_file(path)? }),
        );
    }
    let manifest = json!({
        "tool": "shadow-relight",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "relight",
        "inputs": hashed,
        "parameters": serde_json::to_value(config)?,
        "ambient": {
            "source": r.source_lighting.ambient,
            "target": r.target_lighting.ambient,
        },
        "lighting": {
            "source": r.source_lighting.coeffs,
            "target": r.target_lighting.coeffs,
        },
        "outputs": names.iter().filter(|n| **n != "manifest.json").collect::<Vec<_>>(),
    });
    write_json(&out.path("manifest.json"), &manifest)?;
    print_json(&json!({
        "source_ambient": r.source_lighting.ambient,
        "target_ambient": r.target_lighting.ambient,
        "source_shadow": r.source_mask.shadow_count(),
        "target_shadow": r.target_mask.shadow_count(),
    }));
    Ok(())
}

fn optional_plane(dir: Option<&PathBuf>, stem: &str) -> Result<Option<ImagePlane>> {
    match dir.map(|d| d.join(format!("{stem}.pfm"))) {
        Some(p) if p.exists() => Ok(Some(read_plane(&p)?)),
        _ => Ok(None),
    }
}

fn optional_lighting(dir: Option<&PathBuf>, stem: &str) -> Result<Option<ShLighting>> {
    match dir.map(|d| d.join(format!("{stem}.json"))) {
        Some(p) if p.exists() => Ok(Some(ShLighting::from_json(&read_text(&p)?, &Vec3::zeros())?)),
        _ => Ok(None),
    }
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

pub fn eval(a: &EvalArgs, policy: Policy) -> Result<()> {
    require_inputs([a.relit.as_path(), a.target.as_path()])?;
    if let Some(out) = &a.out {
        check_overwrite([out.clone()], policy)?;
    }
    let names = png_names(&a.relit)?;
    if names.is_empty() {
        return Err(Error::Parameter(format!("no PNG files in {}", a.relit.display())));
    }
    let channels = if a.rgb { MetricChannels::Rgb } else { MetricChannels::Luminance };
    let mut entries = Vec::with_capacity(names.len());
    for name in names {
        let target_path = a.target.join(&name);
        require_inputs([target_path.as_path()])?;
        let relit = read_png(a.relit.join(&name))?;
        let target = read_png(&target_path)?;
        let stem = Path::new(&name).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let ratio = |d: Option<&PathBuf>| -> Result<Option<RatioImage>> {
            optional_plane(d, &stem)?.map(RatioImage::from_plane).transpose()
        };
        let weights = |d: Option<&PathBuf>| -> Result<Option<WeightMap>> {
            Ok(optional_plane(d, &stem)?.map(|plane| WeightMap { plane }))
        };
        let extras = EvalExtras {
            pred_ratio: ratio(a.pred_ratio.as_ref())?,
            truth_ratio: ratio(a.truth_ratio.as_ref())?,
            source_weights: weights(a.source_weights.as_ref())?,
            target_weights: weights(a.target_weights.as_ref())?,
            pred_lighting: optional_lighting(a.pred_lighting.as_ref(), &stem)?,
            truth_lighting: optional_lighting(a.truth_lighting.as_ref(), &stem)?,
        };
        entries.push(ImageEntry {
            path: name,
            metrics: evaluate(&relit, &target, &extras, channels)?,
        });
    }
    let report = serde_json::to_value(aggregate(entries))?;
    match &a.out {
        Some(out) => write_json(out, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn render(mesh: &TriMesh, w: usize, h: usize, light: &LightSpec, ambient: f64, seed: u64) -> Result<(ColorImage, ColorImage, ImagePlane, ShadowMask, ImagePlane)> {
    let g = rasterize_geometry(mesh, w, h)?;
    let mask = shadow::shadow_mask(&g, mesh, light)?;
    let lighting = inject_ambient(&project_light(light, &mesh.centroid())?, ambient)?;
    let shading = shade(&g, &lighting, Some(&mask))?;
    let albedo = synth::albedo(w, h, seed);
    let photo = render_photo(&albedo, &shading)?;
    Ok((albedo, photo, shading, mask, g.hit_mask))
}

pub fn synth(a: &SynthArgs, policy: Policy) -> Result<()> {
    let (w, h) = a.size;
    if !(a.ambient >= 0.0 && a.ambient.is_finite()) {
        return Err(Error::Parameter(format!("ambient must be >= 0, got {}", a.ambient)));
    }
    match a.scene {
        Scene::Sphere | Scene::BoxOnPlane => {
            let out = OutDir::prepare(
                &a.out,
                &[
                    "mesh.obj",
                    "pose.json",
                    "light.json",
                    "target_light.json",
                    "albedo.png",
                    "source.png",
                    "shading.pfm",
                    "gt_mask.png",
                    "gt_mask.pfm",
                    "coverage.pfm",
                    "scene.json",
                ],
                policy,
            )?;
            let (scene, light, analytic) = if a.scene == Scene::Sphere {
                let s = synth::sphere_scene(w, h, 0.4 * w.min(h) as f64);
                let l = LightSpec::directional(Vec3::new(1.0, 0.25, 0.5).normalize(), 0.9)?;
                (s, l, None)
            } else {
                let b = synth::box_on_plane(w, h);
                let mask = b.analytic_mask();
                (b.scene, b.light, Some(mask))
            };
            let target = LightSpec::directional(Vec3::z(), 0.9)?;
            let (albedo, photo, shading, mask, coverage) = render(&scene.mesh, w, h, &light, a.ambient, a.seed)?;
            let gt = analytic.unwrap_or(mask);
            write_obj(out.path("mesh.obj"), &scene.unposed)?;
            write_text(&out.path("pose.json"), &scene.pose.to_json())?;
            write_text(&out.path("light.json"), &light.to_json())?;
            write_text(&out.path("target_light.json"), &target.to_json())?;
            write_png(out.path("albedo.png"), &albedo)?;
            write_png(out.path("source.png"), &photo)?;
            write_pfm(out.path("shading.pfm"), &shading)?;
            write_png_gray(out.path("gt_mask.png"), gt.plane(), 1.0)?;
            write_pfm(out.path("gt_mask.pfm"), gt.plane())?;
            write_pfm(out.path("coverage.pfm"), &coverage)?;
            write_json(
                &out.path("scene.json"),
                &json!({
                    "scene": if a.scene == Scene::Sphere { "sphere" } else { "box_on_plane" },
                    "size": [w, h],
                    "seed": a.seed,
                    "ambient": a.ambient,
                    "triangles": scene.mesh.triangles().len(),
                }),
            )?;
        }
        Scene::TwoStep => {
            if !(a.step > 0.0 && a.lit <= 1.0 && a.lit - 2.0 * a.step >= 0.0) {
                return Err(Error::Parameter(format!(
                    "two_step needs 0 < step and 0 <= lit - 2*step <= lit <= 1, got lit {} step {}",
                    a.lit, a.step
                )));
            }
            let out = OutDir::prepare(
                &a.out,
                &["luminance.png", "luminance.pfm", "mask.png", "mask.pfm", "coverage.pfm", "scene.json"],
                policy,
            )?;
            let s = synth::two_step(w, h, a.lit, a.step);
            write_png(out.path("luminance.png"), &ColorImage::gray(&s.luminance))?;
            write_pfm(out.path("luminance.pfm"), &s.luminance)?;
            write_png_gray(out.path("mask.png"), s.mask.plane(), 1.0)?;
            write_pfm(out.path("mask.pfm"), s.mask.plane())?;
            write_pfm(out.path("coverage.pfm"), s.mask.coverage())?;
            write_json(
                &out.path("scene.json"),
                &json!({
                    "scene": "two_step",
                    "size": [w, h],
                    "seed": a.seed,
                    "lit": a.lit,
                    "step": a.step,
                    "edges": [s.edges.0, s.edges.1],
                }),
            )?;
        }
    }
    Ok(())
}
