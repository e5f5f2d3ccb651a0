mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shadow_relight::border::{BorderParams, ContrastSource};
use shadow_relight::Error;

#[derive(Parser, Debug)]
#[command(name = "shadow-relight", version, about = "Shadow masks, border weights, SH relighting and metrics")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,

    /// Report errors as JSON on stderr.
    #[arg(long, global = true)]
    json_errors: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rasterize a posed mesh and compute its shadow mask.
    ShadowMask(ShadowMaskArgs),
    /// Shadow-border weight map from a mask and an image.
    BorderWeights(BorderWeightsArgs),
    /// Ambient intensity from the shadow pixels of an image.
    Ambient(AmbientArgs),
    /// Relight an image from one light to another.
    Relight(RelightArgs),
    /// Compare relit images with targets.
    Eval(EvalArgs),
    /// Write a synthetic fixture bundle.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct ShadowMaskArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Pose JSON; identity when omitted.
    #[arg(long)]
    pose: Option<PathBuf>,
    #[arg(long)]
    light: PathBuf,
    /// Raster size as WxH.
    #[arg(long, value_parser = parse_size)]
    size: (usize, usize),
    /// Feeler offset as a fraction of the mesh bounding-box diagonal.
    #[arg(long, default_value_t = shadow_relight::shadow::DEFAULT_FEELER_OFFSET)]
    feeler_offset: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct BorderArgs {
    /// JSON file with border parameters; flags override its fields.
    #[arg(long)]
    border_params: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    #[arg(long)]
    sigma_max: Option<f64>,
    #[arg(long)]
    r_max: Option<usize>,
    #[arg(long, value_enum)]
    contrast_source: Option<ContrastArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ContrastArg {
    Luminance,
    Mask,
}

impl BorderArgs {
    fn resolve(&self) -> shadow_relight::Result<BorderParams> {
        let mut p = match &self.border_params {
            Some(path) => BorderParams::from_json(&output::read_text(path)?)?,
            None => BorderParams::default(),
        };
        if let Some(v) = self.window {
            p.window = v;
        }
        if let Some(v) = self.tau1 {
            p.tau1 = v;
        }
        if let Some(v) = self.tau2 {
            p.tau2 = v;
        }
        if let Some(v) = self.sigma_max {
            p.sigma_max = v;
        }
        if let Some(v) = self.r_max {
            p.r_max = v;
        }
        if let Some(v) = self.contrast_source {
            p.contrast_source = match v {
                ContrastArg::Luminance => ContrastSource::Luminance,
                ContrastArg::Mask => ContrastSource::Mask,
            };
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug)]
struct BorderWeightsArgs {
    /// Shadow mask (.pfm or .png); values >= 0.5 are lit.
    #[arg(long)]
    mask: PathBuf,
    /// Coverage plane; everything is covered when omitted.
    #[arg(long)]
    coverage: Option<PathBuf>,
    /// Image whose gamma-encoded luminance supplies the contrast.
    #[arg(long)]
    luminance: PathBuf,
    #[command(flatten)]
    border: BorderArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AmbientArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    coverage: Option<PathBuf>,
    /// Value reported when the mask has no shadow pixels.
    #[arg(long)]
    ambient_default: Option<f64>,
    /// Also write the JSON result to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum AmbientModeArg {
    Direct,
    Irradiance,
}

#[derive(Args, Debug)]
struct RelightArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    pose: Option<PathBuf>,
    #[arg(long)]
    source_light: PathBuf,
    #[arg(long)]
    target_light: PathBuf,
    /// Fixed source ambient instead of estimating it from the image.
    #[arg(long, conflicts_with = "ambient_default")]
    ambient: Option<f64>,
    /// Source ambient used when the source mask has no shadow pixels.
    #[arg(long)]
    ambient_default: Option<f64>,
    /// Target ambient; defaults to the source ambient.
    #[arg(long)]
    target_ambient: Option<f64>,
    #[arg(long, value_enum, default_value = "direct")]
    ambient_mode: AmbientModeArg,
    #[arg(long, default_value_t = shadow_relight::relight::DEFAULT_RATIO_EPSILON)]
    epsilon: f64,
    /// Skip the border weight maps.
    #[arg(long)]
    no_weights: bool,
    #[command(flatten)]
    border: BorderArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Directory of relit PNGs.
    #[arg(long)]
    relit: PathBuf,
    /// Directory of target PNGs with the same file names.
    #[arg(long)]
    target: PathBuf,
    /// Directories of `<stem>.pfm` ratio and weight planes.
    #[arg(long)]
    pred_ratio: Option<PathBuf>,
    #[arg(long)]
    truth_ratio: Option<PathBuf>,
    #[arg(long)]
    source_weights: Option<PathBuf>,
    #[arg(long)]
    target_weights: Option<PathBuf>,
    /// Directories of `<stem>.json` SH lightings.
    #[arg(long)]
    pred_lighting: Option<PathBuf>,
    #[arg(long)]
    truth_lighting: Option<PathBuf>,
    /// Compare all RGB channels instead of luminance.
    #[arg(long)]
    rgb: bool,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Scene {
    Sphere,
    #[value(alias = "two_step")]
    TwoStep,
    #[value(alias = "box_on_plane")]
    BoxOnPlane,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum)]
    scene: Scene,
    #[arg(long, value_parser = parse_size, default_value = "128x128")]
    size: (usize, usize),
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ambient intensity baked into rendered photos.
    #[arg(long, default_value_t = 0.15)]
    ambient: f64,
    /// Lit level of the two-step fixture.
    #[arg(long, default_value_t = 0.8)]
    lit: f64,
    /// Step height of the weaker two-step edge; the other edge is twice as high.
    #[arg(long, default_value_t = 0.2)]
    step: f64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("invalid width in {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("invalid height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err(format!("size must be positive, got {s:?}"));
    }
    Ok((w, h))
}

/// 2 for usage and parameter problems, 3 for bad data.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parameter(_) | Error::Json(_) | Error::Io { .. } => 2,
        _ => 3,
    }
}

fn report(json: bool, kind: &str, message: &str, code: u8) {
    if json {
        let v = serde_json::json!({ "error": { "kind": kind, "message": message, "exit_code": code } });
        eprintln!("{v}");
    } else {
        eprintln!("error: {message}");
    }
}

fn main() -> ExitCode {
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if json_errors {
                report(true, "usage", e.to_string().trim(), 2);
            } else {
                let _ = e.print();
            }
            return ExitCode::from(2);
        }
    };

    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        report(cli.json_errors, "parameter", &format!("cannot start thread pool: {e}"), 2);
        return ExitCode::from(2);
    }

    let out = output::Policy { force: cli.force };
    let result = match &cli.command {
        Command::ShadowMask(a) => commands::shadow_mask(a, out),
        Command::BorderWeights(a) => commands::border_weights(a, out),
        Command::Ambient(a) => commands::ambient(a, out),
        Command::Relight(a) => commands::relight(a, out),
        Command::Eval(a) => commands::eval(a, out),
        Command::Synth(a) => commands::synth(a, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            report(cli.json_errors, e.kind(), &e.to_string(), code);
            ExitCode::from(code)
        }
    }
}
