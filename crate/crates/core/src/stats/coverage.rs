use serde::Serialize;

use crate::density::uniform_road_samples;
use crate::error::{Error, Result};
use crate::geo::Point;
use crate::ingest::{PanoDataset, RoadNetwork};
use crate::scalar::Scalar;
use crate::spatial::KdTree;

/// Default coverage radius in meters.
pub const DEFAULT_COVERAGE_THRESHOLD_M: f64 = 20.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageResult<T> {
    pub covered_fraction: T,
    pub threshold: T,
    pub n_road_points: usize,
    pub n_covered: usize,
}

/// Fraction of road sample points with a panorama within `threshold` (inclusive).
pub fn coverage_of_points<T: Scalar>(road: &[Point<T>], panos: &[Point<T>], threshold: T) -> Result<CoverageResult<T>> {
    if !(threshold > T::zero()) {
        return Err(Error::validation(format!(
            "coverage threshold must be positive, got {threshold}"
        )));
    }
    if road.is_empty() {
        return Err(Error::validation("no road points"));
    }
    let tree = KdTree::new(panos);
    let t2 = threshold * threshold;
    let n_covered = road
        .iter()
        .filter(|&&p| tree.knn(p, 1, None).first().is_some_and(|&(_, d2)| d2 <= t2))
        .count();
    Ok(CoverageResult {
        covered_fraction: T::from_count(n_covered) / T::from_count(road.len()),
        threshold,
        n_road_points: road.len(),
        n_covered,
    })
}

/// Binary coverage of the 20 m road samples of `net` by `panos`.
pub fn coverage_percent(net: &RoadNetwork, panos: &PanoDataset, threshold: f64) -> Result<CoverageResult<f64>> {
    let road = uniform_road_samples(net)?;
    coverage_of_points(road.points(), &panos.points(), threshold)
}

/// Coefficient of determination of the least-squares line of `y` on `x`.
pub fn r_squared<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "r_squared: {} x values, {} y values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::validation("r_squared needs at least 3 points"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::validation("r_squared: non-finite value"));
    }
    let n = T::from_count(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
        sxy = sxy + dx * dy;
    }
    if sxx == T::zero() {
        return Err(Error::validation("r_squared: x is constant"));
    }
    if syy == T::zero() {
        // A constant y is fitted exactly by the flat line.
        return Ok(T::one());
    }
    Ok((sxy * sxy / (sxx * syy)).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(v: &[f64]) -> Vec<Point<f64>> {
        v.iter().map(|&x| Point::new(x, 0.0)).collect()
    }

    #[test]
    fn hand_example() {
        let road = line(&[0.0, 20.0, 40.0, 60.0, 80.0]);
        let r = coverage_of_points(&road, &line(&[0.0, 41.0]), 20.0).unwrap();
        assert_eq!(r.n_covered, 4);
        assert_eq!(r.covered_fraction, 0.8);
    }

    #[test]
    fn full_and_empty() {
        let road = line(&[0.0, 20.0, 40.0]);
        assert_eq!(coverage_of_points(&road, &road, 20.0).unwrap().covered_fraction, 1.0);
        assert_eq!(coverage_of_points(&road, &[], 20.0).unwrap().covered_fraction, 0.0);
        assert!(coverage_of_points(&[], &road, 20.0).is_err());
        assert!(coverage_of_points(&road, &road, 0.0).is_err());
    }

    #[test]
    fn r_squared_examples() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((r_squared(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        assert!(r_squared(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x: Vec<f64> = (0..1000).map(|_| rng.gen()).collect();
        let y: Vec<f64> = (0..1000).map(|_| rng.gen()).collect();
        assert!(r_squared(&x, &y).unwrap() <= 0.02);
    }

    proptest! {
        #[test]
        fn coverage_monotone_in_threshold(
            road in prop::collection::vec((0.0f64..500.0, 0.0f64..500.0), 1..60),
            panos in prop::collection::vec((0.0f64..500.0, 0.0f64..500.0), 0..40),
            t1 in 0.1f64..100.0,
            extra in 0.0f64..100.0,
        ) {
            let road: Vec<_> = road.into_iter().map(|(x, y)| Point::new(x, y)).collect();
            let panos: Vec<_> = panos.into_iter().map(|(x, y)| Point::new(x, y)).collect();
            let a = coverage_of_points(&road, &panos, t1).unwrap();
            let b = coverage_of_points(&road, &panos, t1 + extra).unwrap();
            prop_assert!(a.covered_fraction <= b.covered_fraction);
            prop_assert_eq!(a.covered_fraction, a.n_covered as f64 / a.n_road_points as f64);
        }

        #[test]
        fn r_squared_affine_invariant(
            pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            sx in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
            sy in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
            ox in -1e3f64..1e3,
            oy in -1e3f64..1e3,
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            prop_assume!(x.iter().any(|v| *v != x[0]) && y.iter().any(|v| *v != y[0]));
            let a = r_squared(&x, &y).unwrap();
            let x2: Vec<f64> = x.iter().map(|v| sx * v + ox).collect();
            let y2: Vec<f64> = y.iter().map(|v| sy * v + oy).collect();
            let b = r_squared(&x2, &y2).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
