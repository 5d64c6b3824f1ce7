//! Saliency-driven image manipulation.
//!
//! Given an image, a region and a target saliency contrast, the engine
//! re-synthesizes the image from its own patches so that the region stands
//! out from (or recedes into) the rest of the scene by the requested amount.
//! Salient patches are drawn from one database, non-salient ones from
//! another; the thresholds splitting the two are searched greedily while the
//! image is repeatedly rebuilt by PatchMatch search-and-vote followed by a
//! screened Poisson blend with the original gradients.

// `!(x >= lo)` is used on purpose: it also rejects NaN parameters.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod image;
pub mod metrics;
mod par;
pub mod patchdb;
pub mod pipeline;
pub mod poisson;
pub mod saliency;
pub mod setup;
pub mod synthesis;
pub mod synthetic;

pub use error::{Error, Result};
pub use image::{LabImage, Mask, RgbImage};
pub use pipeline::{run_manipulation, run_with_setup, ManipulationConfig, RunOutput, RunReport, Termination, TraceEntry};
pub use saliency::{compute_saliency, contrast_psi, saliency_energy, SaliencyMap};
pub use setup::{build_setup, Label, Mode, SetupMask};
