//! Patch-level 2D Gaussian splatting for image fitting and inpainting.
//!
//! Images are represented as sums of anisotropic 2D Gaussians. The image plane
//! is split into cells that each own a fixed number of Gaussians; cells are
//! rendered over slightly enlarged windows and blended where they overlap.
//! Parameters are fitted directly by gradient descent against a masked L1
//! reconstruction loss, so that missing pixels are filled by the continuous
//! Gaussian field.

pub mod cli;
pub mod condition;
pub mod error;
pub mod gaussian;
pub mod grad;
pub mod image;
pub mod optim;
pub mod raster;

pub use error::{Error, Result};
pub use gaussian::{EffectiveGaussian, GaussianSet, RawGaussian};
pub use image::{ImageBuffer, MaskBuffer};
pub use raster::{GridGeometry, PatchGrid};
