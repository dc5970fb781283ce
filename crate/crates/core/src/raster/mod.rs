//! Binary raster model and the image-level primitives the pipeline builds
//! on: binarisation, skew and slant normalisation, water reservoirs,
//! run-length smoothing and projection profiles.

mod binarize;
mod components;
mod geometry;
mod image;
pub mod pnm;
mod profile;
mod reservoir;
mod rlsa;

pub use binarize::{binarize, otsu_threshold, to_gray};
pub use components::remove_specks;
pub use geometry::{deskew, deslant, estimate_skew, rotate, shear, slant_angle, SkewEstimate};
pub use image::{Depth, RasterImage};
pub use profile::{profiles, ProfileSet};
pub use reservoir::{
    bottom_reservoirs, escape_row, group_reservoirs, trapped_mask, Reservoir, MIN_RESERVOIR_HEIGHT,
};
pub use rlsa::rlsa_horizontal;
