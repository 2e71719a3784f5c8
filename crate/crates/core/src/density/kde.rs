use rayon::prelude::*;

use super::field::{DensityField, FieldKind, GridSpec};
use super::samples::{SamplePoints, SampleSource};
use crate::error::{Error, Result};
use crate::geo::{Bbox, Point};
use crate::scalar::Scalar;

/// Kernel truncation radius in bandwidths for [`KdeMode::Cutoff`].
pub const CUTOFF_BANDWIDTHS: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KdeMode {
    /// Ignore samples farther than 6h from a cell center.
    #[default]
    Cutoff,
    /// Sum over every sample.
    Exact,
}

/// Gaussian KDE at cell centers with the 6h cutoff.
pub fn kde_field<T: Scalar>(samples: &SamplePoints<T>, bandwidth: T, grid: &GridSpec<T>) -> Result<DensityField<T>> {
    kde_field_with(samples, bandwidth, grid, KdeMode::Cutoff)
}

/// `f(g) = Σ wᵢ·exp(−‖g − xᵢ‖²/(2h²)) / (2πh²·Σ wᵢ)` at every cell center.
pub fn kde_field_with<T: Scalar>(
    samples: &SamplePoints<T>,
    bandwidth: T,
    grid: &GridSpec<T>,
    mode: KdeMode,
) -> Result<DensityField<T>> {
    if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
        return Err(Error::validation(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if samples.is_empty() {
        return Err(Error::validation("KDE needs at least one sample"));
    }
    let kind = match samples.source() {
        SampleSource::Panoramas => FieldKind::Real,
        SampleSource::UniformRoad | SampleSource::WeightedPrior => FieldKind::Uniform,
    };
    let two_pi = T::lit(std::f64::consts::TAU);
    let norm = T::one() / (two_pi * bandwidth * bandwidth * samples.total_weight());
    let inv_2h2 = T::one() / (T::lit(2.0) * bandwidth * bandwidth);
    let kernel = |c: Point<T>, i: usize| samples.weight(i) * (-(c.dist2(samples.points()[i]) * inv_2h2)).exp();

    let mut values = vec![T::zero(); grid.len()];
    match mode {
        KdeMode::Exact => {
            values.par_chunks_mut(grid.nx).enumerate().for_each(|(j, row)| {
                for (i, v) in row.iter_mut().enumerate() {
                    let c = grid.cell_center(i, j);
                    let mut s = T::zero();
                    for k in 0..samples.len() {
                        s = s + kernel(c, k);
                    }
                    *v = s * norm;
                }
            });
        }
        KdeMode::Cutoff => {
            let radius = bandwidth * T::lit(CUTOFF_BANDWIDTHS);
            let buckets = Buckets::new(samples.points(), radius);
            let r2 = radius * radius;
            values.par_chunks_mut(grid.nx).enumerate().for_each(|(j, row)| {
                for (i, v) in row.iter_mut().enumerate() {
                    let c = grid.cell_center(i, j);
                    let mut s = T::zero();
                    buckets.for_each_near(c, radius, |k| {
                        let d2 = c.dist2(samples.points()[k]);
                        if d2 <= r2 {
                            s = s + samples.weight(k) * (-(d2 * inv_2h2)).exp();
                        }
                    });
                    *v = s * norm;
                }
            });
        }
    }
    Ok(DensityField {
        grid: *grid,
        values,
        kind,
        bandwidth: Some(bandwidth),
    })
}

/// Uniform bucket grid over the sample bbox; each bucket lists point indices in order.
struct Buckets<T> {
    min: Point<T>,
    side: T,
    nx: usize,
    ny: usize,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl<T: Scalar> Buckets<T> {
    fn new(points: &[Point<T>], side: T) -> Self {
        let bb = Bbox::of_points(points).expect("non-empty");
        let count = |extent: T| (extent / side).floor().to_usize().unwrap_or(0) + 1;
        let (nx, ny) = (count(bb.width()), count(bb.height()));
        let cell_of = |p: Point<T>| {
            let i = ((p.x - bb.min.x) / side).floor().to_usize().unwrap_or(0).min(nx - 1);
            let j = ((p.y - bb.min.y) / side).floor().to_usize().unwrap_or(0).min(ny - 1);
            j * nx + i
        };
        let mut start = vec![0usize; nx * ny + 1];
        for &p in points {
            start[cell_of(p) + 1] += 1;
        }
        for b in 0..nx * ny {
            start[b + 1] += start[b];
        }
        let mut fill = start.clone();
        let mut items = vec![0usize; points.len()];
        for (k, &p) in points.iter().enumerate() {
            let b = cell_of(p);
            items[fill[b]] = k;
            fill[b] += 1;
        }
        Buckets {
            min: bb.min,
            side,
            nx,
            ny,
            start,
            items,
        }
    }

    /// Calls `f` for every point in buckets overlapping the square of half-side `r` around `c`.
    fn for_each_near(&self, c: Point<T>, r: T, mut f: impl FnMut(usize)) {
        let range = |lo: T, hi: T, n: usize| -> Option<(usize, usize)> {
            let a = ((lo) / self.side).floor();
            let b = ((hi) / self.side).floor();
            if b < T::zero() || a >= T::from_count(n) {
                return None;
            }
            let a = a.max(T::zero()).to_usize().unwrap_or(0);
            let b = b.to_usize().unwrap_or(n - 1).min(n - 1);
            Some((a, b))
        };
        let Some((i0, i1)) = range(c.x - r - self.min.x, c.x + r - self.min.x, self.nx) else {
            return;
        };
        let Some((j0, j1)) = range(c.y - r - self.min.y, c.y + r - self.min.y, self.ny) else {
            return;
        };
        for j in j0..=j1 {
            for i in i0..=i1 {
                let b = j * self.nx + i;
                for &k in &self.items[self.start[b]..self.start[b + 1]] {
                    f(k);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(v: &[(f64, f64)]) -> SamplePoints<f64> {
        SamplePoints::new(
            v.iter().map(|&(x, y)| Point::new(x, y)).collect(),
            SampleSource::Panoramas,
        )
    }

    #[test]
    fn single_point_peak() {
        let grid = GridSpec::new(Point::new(-25.0, -25.0), 50.0, 5, 5).unwrap();
        let f = kde_field(&pts(&[(0.0, 0.0)]), 100.0, &grid).unwrap();
        let peak = 1.0 / (2.0 * std::f64::consts::PI * 100.0 * 100.0);
        assert!((f.value(0, 0) - peak).abs() < 1e-15);
        assert!((peak - 1.5915e-5).abs() < 1e-9);
        assert_eq!(f.kind, FieldKind::Real);
    }

    #[test]
    fn two_points_average_single_fields() {
        let grid = GridSpec::new(Point::new(-300.0, -300.0), 40.0, 15, 15).unwrap();
        let a = kde_field(&pts(&[(10.0, 20.0)]), 80.0, &grid).unwrap();
        let b = kde_field(&pts(&[(-50.0, 100.0)]), 80.0, &grid).unwrap();
        let ab = kde_field(&pts(&[(10.0, 20.0), (-50.0, 100.0)]), 80.0, &grid).unwrap();
        for k in 0..grid.len() {
            assert!((ab.values[k] - 0.5 * (a.values[k] + b.values[k])).abs() < 1e-18);
        }
    }

    #[test]
    fn uniform_square_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p: Vec<_> = (0..10_000)
            .map(|_| Point::new(rng.gen_range(0.0..10_000.0), rng.gen_range(0.0..10_000.0)))
            .collect();
        let s = SamplePoints::new(p, SampleSource::UniformRoad);
        let grid = GridSpec::new(Point::new(0.0, 0.0), 1000.0, 10, 10).unwrap();
        let f = kde_field(&s, 200.0, &grid).unwrap();
        let rel: Vec<f64> = (2..8)
            .flat_map(|j| (2..8).map(move |i| (i, j)))
            .map(|(i, j)| f.value(i, j) / 1e-8 - 1.0)
            .collect();
        let mean = rel.iter().sum::<f64>() / rel.len() as f64;
        assert!(mean.abs() < 0.2, "interior mean deviation {mean}");
        // Pointwise spread: var f = p / (4π n h²), i.e. 1/sqrt(4π·1e4·4e4·1e-8) ≈ 0.141 relative.
        let sd = (rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rel.len() - 1) as f64).sqrt();
        let expected = 1.0 / (4.0 * std::f64::consts::PI * 10_000.0 * 200.0f64.powi(2) * 1e-8).sqrt();
        assert!((sd / expected - 1.0).abs() < 0.5, "spread {sd} vs {expected}");
    }

    #[test]
    fn normalization_with_pad() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p: Vec<_> = (0..500)
            .map(|_| Point::new(rng.gen_range(0.0..2000.0), rng.gen_range(0.0..1500.0)))
            .collect();
        let bb = Bbox::of_points(&p).unwrap();
        let s = SamplePoints::new(p, SampleSource::UniformRoad);
        let h = 100.0;
        let grid = GridSpec::covering(bb, 50.0, 4.0 * h).unwrap();
        let f = kde_field(&s, h, &grid).unwrap();
        let total: f64 = f.integral();
        assert!((total - 1.0).abs() < 0.02, "{total}");
    }

    #[test]
    fn cutoff_matches_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<_> = (0..400)
            .map(|_| Point::new(rng.gen_range(0.0..3000.0), rng.gen_range(0.0..3000.0)))
            .collect();
        let s = SamplePoints::new(p, SampleSource::Panoramas);
        let grid = GridSpec::new(Point::new(-500.0, -500.0), 100.0, 40, 40).unwrap();
        let a = kde_field_with(&s, 150.0, &grid, KdeMode::Cutoff).unwrap();
        let b = kde_field_with(&s, 150.0, &grid, KdeMode::Exact).unwrap();
        let peak = b.values.iter().cloned().fold(0.0, f64::max);
        for k in 0..grid.len() {
            assert!((a.values[k] - b.values[k]).abs() <= 1e-7 * peak);
        }
    }

    #[test]
    fn equal_weights_equal_unweighted() {
        let p: Vec<_> = (0..50)
            .map(|i| Point::new(i as f64 * 13.0, (i * i) as f64 % 170.0))
            .collect();
        let plain = SamplePoints::new(p.clone(), SampleSource::UniformRoad);
        let weighted = SamplePoints::weighted(p, vec![2.5; 50], SampleSource::UniformRoad).unwrap();
        let grid = GridSpec::new(Point::new(-200.0, -200.0), 25.0, 40, 24).unwrap();
        let a = kde_field(&plain, 60.0, &grid).unwrap();
        let b = kde_field(&weighted, 60.0, &grid).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn invalid_bandwidth() {
        let grid = GridSpec::new(Point::new(0.0, 0.0), 10.0, 2, 2).unwrap();
        assert!(kde_field(&pts(&[(0.0, 0.0)]), 0.0, &grid).is_err());
        assert!(kde_field(&pts(&[(0.0, 0.0)]), -5.0, &grid).is_err());
        assert!(kde_field(&pts(&[]), 5.0, &grid).is_err());
    }

    #[test]
    fn f32_field() {
        let s = SamplePoints::new(vec![Point::new(0.0f32, 0.0)], SampleSource::Panoramas);
        let grid = GridSpec::new(Point::new(-25.0f32, -25.0), 50.0, 3, 3).unwrap();
        let f = kde_field(&s, 100.0f32, &grid).unwrap();
        assert!((f.value(0, 0) - 1.5915494e-5).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn translation_equivariant(dx in -1e5f64..1e5, dy in -1e5f64..1e5, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p: Vec<_> = (0..200)
                .map(|_| Point::new(rng.gen_range(0.0..1500.0), rng.gen_range(0.0..1500.0)))
                .collect();
            let s = SamplePoints::new(p, SampleSource::Panoramas);
            let grid = GridSpec::new(Point::new(-200.0, -200.0), 64.0, 30, 30).unwrap();
            let off = Point::new(dx, dy);
            let a = kde_field(&s, 90.0, &grid).unwrap();
            let b = kde_field(&s.translated(off), 90.0, &grid.translated(off)).unwrap();
            let peak = a.values.iter().cloned().fold(0.0, f64::max);
            for k in 0..grid.len() {
                prop_assert!((a.values[k] - b.values[k]).abs() <= 1e-9 * peak);
            }
        }
    }
}
