use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched dimensions or otherwise malformed containers.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("domain error at pixel (x={x}, y={y}): {msg}")]
    PixelDomain { x: usize, y: usize, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("mesh has no triangles")]
    EmptyMesh,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("no shadow pixels: the mask has no covered pixel with value 0")]
    NoShadowPixels,

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid file format in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Structural(_) => "structural",
            Error::PixelDomain { .. } => "pixel_domain",
            Error::Domain(_) => "domain",
            Error::Parse { .. } => "parse",
            Error::EmptyMesh => "empty_mesh",
            Error::DegenerateGeometry(_) => "degenerate_geometry",
            Error::NoShadowPixels => "no_shadow_pixels",
            Error::Contract(_) => "contract",
            Error::Parameter(_) => "parameter",
            Error::Format { .. } => "format",
            Error::Json(_) => "json",
            Error::Io { .. } => "io",
        }
    }

    /// Whether the error stems from bad user parameters rather than bad data.
    pub fn is_parameter(&self) -> bool {
        matches!(self, Error::Parameter(_))
    }
}
