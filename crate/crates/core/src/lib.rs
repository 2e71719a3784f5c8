//! Street-view coverage distribution analysis.
//!
//! Compares where street-level panoramas were captured against a prior
//! spread uniformly (or by weight) over a city's road network: density
//! fields and their difference map, kNN KL divergence, debiased Sinkhorn
//! EMD, binary coverage, and two-group MANOVA.
//!
//! The numerical kernels are generic over [`Scalar`] (`f32`/`f64`); the
//! aliases below fix the scalar to `f64` for the I/O-facing layers.

pub mod density;
pub mod divergence;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod planner;
pub mod report;
pub mod scalar;
pub mod spatial;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Projected point in meters.
pub type ProjPoint = geo::Point<f64>;
pub type Polygon = geo::Polygon<f64>;
pub type Polyline = geo::Polyline<f64>;
pub type Bbox = geo::Bbox<f64>;
pub type SamplePoints = density::SamplePoints<f64>;
pub type DensityField = density::DensityField<f64>;
pub type GridSpec = density::GridSpec<f64>;
pub type ManovaResult = stats::ManovaResult<f64>;
pub type CoverageResult = stats::CoverageResult<f64>;

pub use geo::{GeoPoint, Projection};
