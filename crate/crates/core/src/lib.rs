//! Grouped score-weighted class activation maps.
//!
//! The crate is split along the pipeline:
//!
//! - [`imgproc`]: deterministic array primitives (blur, resampling, percentiles, blending).
//! - [`model`]: the [`ModelAdapter`] boundary, a small trainable CNN and the synthetic
//!   shapes dataset it is trained on.
//! - [`saliency`]: Group-CAM, Grad-CAM and the gradient-free fine-tuning mask.
//! - [`evaluation`]: deletion/insertion curves, pointing game and randomization checks.
//! - [`finetune`]: saliency-guided augmentation and the paired fine-tuning run.
//! - [`persist`]: on-disk formats for saliency grids and annotation indexes.

pub mod colormap;
pub mod error;
pub mod evaluation;
pub mod finetune;
pub mod imgproc;
pub mod model;
pub mod persist;
pub mod saliency;

pub use error::{Error, Result};
pub use imgproc::{ImageTensor, Map2D};
pub use model::{ActivationBundle, Counting, ModelAdapter};
pub use saliency::{GroupCamConfig, SaliencyMap};
