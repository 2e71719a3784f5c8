//! Binary coverage, regression fit and two-group MANOVA.

mod coverage;
mod manova;
pub mod special;

pub use coverage::{coverage_of_points, coverage_percent, r_squared, CoverageResult, DEFAULT_COVERAGE_THRESHOLD_M};
pub use manova::{manova_two_group, manova_two_group_named, ManovaPValues, ManovaResult};
pub use special::{f_cdf, f_sf, ln_gamma, reg_inc_beta};
