use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::SamplePoints;
use crate::error::{Error, Result};
use crate::geo::Point;
use crate::scalar::Scalar;
use crate::spatial::KdTree;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KlConfig {
    pub k: usize,
    /// Dimension `d` in the estimator; 2 for planar points.
    pub d: usize,
    /// Floor applied to both neighbour distances, in coordinate units.
    pub min_distance: f64,
}

impl Default for KlConfig {
    fn default() -> Self {
        KlConfig {
            k: 1,
            d: 2,
            min_distance: 1e-9,
        }
    }
}

/// Neighbour distances feeding the estimator, after duplicate removal and clamping.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnDistances<T> {
    /// k-th neighbour distance of each `xᵢ` within `X ∖ {xᵢ}`.
    pub r: Vec<T>,
    /// k-th neighbour distance of each `xᵢ` in `X'`.
    pub s: Vec<T>,
    /// Sizes of `X` and `X'` after duplicate removal.
    pub n: usize,
    pub m: usize,
}

/// Removes exact repeats, keeping first occurrences in order.
pub fn dedup_points<T: Scalar>(points: &[Point<T>]) -> Vec<Point<T>> {
    let key = |p: &Point<T>| {
        // +0.0 and -0.0 compare equal and must share a key.
        let norm = |v: T| if v == T::zero() { 0.0f64 } else { v.as_f64() };
        (norm(p.x).to_bits(), norm(p.y).to_bits())
    };
    let mut seen = HashSet::with_capacity(points.len());
    points.iter().filter(|p| seen.insert(key(p))).copied().collect()
}

pub fn knn_distances<T: Scalar>(x: &[Point<T>], x_prime: &[Point<T>], cfg: &KlConfig) -> Result<KnnDistances<T>> {
    let x = dedup_points(x);
    let y = dedup_points(x_prime);
    let (n, m) = (x.len(), y.len());
    if cfg.k == 0 {
        return Err(Error::validation("k must be at least 1"));
    }
    if n < 2 || cfg.k >= n {
        return Err(Error::validation(format!(
            "KL estimator needs k < n; got k = {}, n = {n} distinct points",
            cfg.k
        )));
    }
    if cfg.k > m {
        return Err(Error::validation(format!(
            "KL estimator needs k <= m; got k = {}, m = {m} distinct points",
            cfg.k
        )));
    }
    let floor = T::lit(cfg.min_distance);
    let own = KdTree::new(&x);
    let other = KdTree::new(&y);
    let pairs: Vec<(T, T)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let r = own.kth_distance(x[i], cfg.k, Some(i)).expect("k < n");
            let s = other.kth_distance(x[i], cfg.k, None).expect("k <= m");
            (r.max(floor), s.max(floor))
        })
        .collect();
    let (r, s) = pairs.into_iter().unzip();
    Ok(KnnDistances { r, s, n, m })
}

/// kNN estimate of `KL(P ‖ Q)` in nats from samples `x ~ P`, `x_prime ~ Q`:
/// `(d/n)·Σ ln(sₖ(xᵢ)/rₖ(xᵢ)) + ln(m/(n−1))`.
pub fn knn_kl_points<T: Scalar>(x: &[Point<T>], x_prime: &[Point<T>], cfg: &KlConfig) -> Result<T> {
    let dist = knn_distances(x, x_prime, cfg)?;
    Ok(kl_from_distances(&dist, cfg.d))
}

pub fn knn_kl<T: Scalar>(x: &SamplePoints<T>, x_prime: &SamplePoints<T>, cfg: &KlConfig) -> Result<T> {
    knn_kl_points(x.points(), x_prime.points(), cfg)
}

pub fn kl_from_distances<T: Scalar>(dist: &KnnDistances<T>, d: usize) -> T {
    let sum: T = dist.r.iter().zip(&dist.s).map(|(&r, &s)| (s / r).ln()).sum();
    T::from_count(d) / T::from_count(dist.n) * sum + (T::from_count(dist.m) / T::from_count(dist.n - 1)).ln()
}
