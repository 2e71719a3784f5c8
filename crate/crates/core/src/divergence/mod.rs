//! Sample-based distances between point distributions.

mod exact;
mod knn;
mod sinkhorn;

use serde::Serialize;

use crate::density::SamplePoints;
use crate::error::Result;

pub use exact::{exact_ot, hungarian, EXACT_OT_MAX_POINTS};
pub use knn::{dedup_points, kl_from_distances, knn_distances, knn_kl, knn_kl_points, KlConfig, KnnDistances};
pub use sinkhorn::{sinkhorn_emd, SinkhornConfig, SinkhornResult};

/// Both distances for one (panoramas, prior) pair with the settings that produced them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceResult {
    pub emd: f64,
    pub kl: f64,
    pub n_used: usize,
    pub m_used: usize,
    pub emd_converged: bool,
    pub emd_dual_gap: f64,
    pub kl_config: KlConfig,
    pub sinkhorn_config: SinkhornConfig,
}

/// kNN KL and Sinkhorn EMD of `panos` against `prior`.
pub fn compare_samples(
    panos: &SamplePoints<f64>,
    prior: &SamplePoints<f64>,
    kl_config: &KlConfig,
    sinkhorn_config: &SinkhornConfig,
) -> Result<DistanceResult> {
    let kl = knn_kl(panos, prior, kl_config)?;
    let emd = sinkhorn_emd(panos, prior, sinkhorn_config)?;
    Ok(DistanceResult {
        emd: emd.value,
        kl,
        n_used: emd.n_used,
        m_used: emd.m_used,
        emd_converged: emd.converged,
        emd_dual_gap: emd.dual_gap,
        kl_config: *kl_config,
        sinkhorn_config: *sinkhorn_config,
    })
}
