//! Three-zone segmentation of text lines: HMM patch parsing per vertical
//! strip, boundary repair and interpolation, the projection-profile
//! baseline, and splitting a line into its zone images.

mod boundaries;
mod extract;
mod hmm_zones;
mod projection;

pub use boundaries::{smooth_boundaries, Strip, ZoneBoundaries};
pub use extract::{extract_middle_zone, ZoneImages};
pub use hmm_zones::{
    align_zones, estimate_line_height, label_runs, patch_labels, segment_zones, train_zone_hmm, zone_patch_sequence,
    zone_strips, LineHeight, StripFeatures, StripParse, ZoneParams, ZonePatchLabel,
};
pub use projection::{projection_zone_baseline, ProjectionMode};
