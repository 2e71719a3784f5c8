//! Sample sets on the road network and Gaussian KDE fields on a regular grid.

mod field;
mod kde;
mod samples;

pub use field::{delta_field, DensityField, FieldKind, GridSpec};
pub use kde::{kde_field, kde_field_with, KdeMode, CUTOFF_BANDWIDTHS};
pub use samples::{
    panorama_samples, uniform_road_samples, weighted_prior_samples, SamplePoints, SampleSource, ROAD_SAMPLE_INTERVAL_M,
};

/// Default kernel bandwidth in meters.
pub const DEFAULT_BANDWIDTH_M: f64 = 200.0;
/// Default grid cell side in meters.
pub const DEFAULT_CELL_M: f64 = 1000.0;
/// Grid padding around the boundary bbox, in bandwidths.
pub const GRID_PAD_BANDWIDTHS: f64 = 4.0;
