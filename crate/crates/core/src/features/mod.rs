//! Frame-level features: sliding windows, PHOG/LGH descriptors over ink and
//! reservoir layers, and the column profiles used by the DTW baseline.

mod line;
mod phog;
mod profile_features;
mod sequence;
mod window;

pub use line::{background_mask, extract_from_layers, extract_line_features, frame_scale, FeatureMode};
pub use phog::{lgh, orientation_bin, phog, sobel_at, GradientField, PhogParams, LGH_DIM};
pub use profile_features::dtw_profile_features;
pub use sequence::{FeatureSequence, Provenance};
pub use window::{frame_windows, WindowSpec};
