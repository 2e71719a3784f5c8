use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Point, Polygon};
use crate::ingest::{PanoDataset, RoadNetwork};
use crate::scalar::Scalar;

/// Spacing of prior samples along roads, in meters.
pub const ROAD_SAMPLE_INTERVAL_M: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    UniformRoad,
    Panoramas,
    WeightedPrior,
}

/// Projected points with optional non-negative weights.
///
/// Weights that are all equal are stored as `None`, so a constant-weight set
/// is indistinguishable from the unweighted one.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePoints<T> {
    points: Vec<Point<T>>,
    weights: Option<Vec<T>>,
    source: SampleSource,
}

impl<T: Scalar> SamplePoints<T> {
    pub fn new(points: Vec<Point<T>>, source: SampleSource) -> Self {
        SamplePoints {
            points,
            weights: None,
            source,
        }
    }

    pub fn weighted(points: Vec<Point<T>>, weights: Vec<T>, source: SampleSource) -> Result<Self> {
        if weights.len() != points.len() {
            return Err(Error::validation(format!(
                "{} weights for {} points",
                weights.len(),
                points.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::validation("weights must be finite and non-negative"));
        }
        if !points.is_empty() && !(weights.iter().copied().sum::<T>() > T::zero()) {
            return Err(Error::validation("weights sum to zero"));
        }
        let uniform = weights.windows(2).all(|w| w[0] == w[1]);
        Ok(SamplePoints {
            points,
            weights: if uniform { None } else { Some(weights) },
            source,
        })
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn weights(&self) -> Option<&[T]> {
        self.weights.as_deref()
    }

    pub fn source(&self) -> SampleSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights.as_ref().map_or(T::one(), |w| w[i])
    }

    pub fn total_weight(&self) -> T {
        match &self.weights {
            Some(w) => w.iter().copied().sum(),
            None => T::from_count(self.points.len()),
        }
    }

    /// Copy with every point translated by `offset`.
    pub fn translated(&self, offset: Point<T>) -> Self {
        SamplePoints {
            points: self.points.iter().map(|&p| p + offset).collect(),
            ..self.clone()
        }
    }
}

/// Points every 20 m along every road, starting at each part's first vertex.
pub fn uniform_road_samples(net: &RoadNetwork) -> Result<SamplePoints<f64>> {
    if net.is_empty() {
        return Err(Error::validation("road network is empty"));
    }
    let mut points = Vec::new();
    for line in net.polylines() {
        points.extend(line.resample(ROAD_SAMPLE_INTERVAL_M)?);
    }
    Ok(SamplePoints::new(points, SampleSource::UniformRoad))
}

/// Uniform road samples weighted by the first region containing each point.
/// Points in no region get weight 0.
pub fn weighted_prior_samples(net: &RoadNetwork, regions: &[(Polygon<f64>, f64)]) -> Result<SamplePoints<f64>> {
    let base = uniform_road_samples(net)?;
    if regions.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::validation("region weights must be finite and non-negative"));
    }
    let indexed: Vec<_> = regions.iter().map(|(p, w)| (p.prepare(), *w)).collect();
    let mut uncovered = 0usize;
    let weights: Vec<f64> = base
        .points
        .iter()
        .map(|&p| match indexed.iter().find(|(poly, _)| poly.contains(p)) {
            Some((_, w)) => *w,
            None => {
                uncovered += 1;
                0.0
            }
        })
        .collect();
    if uncovered > 0 {
        warn!("{uncovered} road samples outside every weight region; weighted 0");
    }
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::validation("all prior weights are zero"));
    }
    SamplePoints::weighted(base.points, weights, SampleSource::WeightedPrior)
}

/// Panorama locations in the dataset projection.
pub fn panorama_samples(ds: &PanoDataset) -> SamplePoints<f64> {
    SamplePoints::new(ds.points(), SampleSource::Panoramas)
}
