//! Shadow-aware ratio-image relighting.
//!
//! The crate covers the deterministic parts of a face relighting pipeline:
//!
//! * [`image`] and [`io`]: float rasters, BT.601 YUV, gamma, PNG/PFM files.
//! * [`mesh`]: posed triangle meshes, BVH ray casting, orthographic G-buffers.
//! * [`shadow`]: binary shadow masks from self- and cast-shadow tests.
//! * [`lighting`]: order-2 spherical-harmonics lighting, ambient estimation.
//! * [`border`]: contrast-weighted shadow-border weight maps.
//! * [`relight`]: ratio images in gamma space and their application.
//! * [`metrics`]: ratio losses, Si-MSE, MSE, SSIM/DSSIM and batch reports.
//! * [`synth`]: deterministic synthetic scenes used as test fixtures.

pub mod border;
pub mod error;
pub mod image;
pub mod io;
pub mod lighting;
pub mod mesh;
pub mod metrics;
pub mod relight;
pub mod shadow;
pub mod synth;

pub use error::{Error, Result};
