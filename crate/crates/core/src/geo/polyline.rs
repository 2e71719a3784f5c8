use super::point::Point;
use super::polygon::IndexedPolygon;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Open polyline with at least two points; consecutive points are distinct.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline<T> {
    points: Vec<Point<T>>,
}

impl<T: Scalar> Polyline<T> {
    /// Builds a polyline, collapsing consecutive repeated vertices.
    pub fn new(mut points: Vec<Point<T>>) -> Result<Self> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation("polyline has non-finite vertex"));
        }
        points.dedup();
        if points.len() < 2 {
            return Err(Error::validation("polyline needs at least two distinct points"));
        }
        Ok(Polyline { points })
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn start(&self) -> Point<T> {
        self.points[0]
    }

    pub fn end(&self) -> Point<T> {
        *self.points.last().expect("non-empty")
    }

    pub fn length(&self) -> T {
        self.points.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    /// Points at arc-length positions `0, interval, 2·interval, …` up to the
    /// total length. A trailing partial interval is dropped.
    pub fn resample(&self, interval: T) -> Result<Vec<Point<T>>> {
        self.resample_from(T::zero(), interval)
    }

    /// Like [`resample`](Self::resample) but starting at arc length `offset`.
    pub fn resample_from(&self, offset: T, interval: T) -> Result<Vec<Point<T>>> {
        if !(interval > T::zero()) || !interval.is_finite() {
            return Err(Error::validation(format!(
                "resample interval must be positive, got {interval}"
            )));
        }
        if offset < T::zero() {
            return Err(Error::validation("resample offset must be non-negative"));
        }
        self.points_at(offset, interval, self.length())
    }

    /// Resampled points restricted to the prefix of arc length `limit`.
    pub fn resample_prefix(&self, offset: T, interval: T, limit: T) -> Result<Vec<Point<T>>> {
        if !(interval > T::zero()) {
            return Err(Error::validation("resample interval must be positive"));
        }
        self.points_at(offset, interval, limit.min(self.length()))
    }

    fn points_at(&self, offset: T, interval: T, limit: T) -> Result<Vec<Point<T>>> {
        if offset > limit {
            return Ok(Vec::new());
        }
        let slack = T::lit(1e-9);
        let count = ((limit - offset) / interval + slack).floor();
        let count = count
            .to_usize()
            .ok_or_else(|| Error::validation("resample count overflow"))?
            + 1;
        let mut out = Vec::with_capacity(count);
        let mut seg = 0;
        let mut seg_start = T::zero();
        let mut seg_len = self.points[0].dist(self.points[1]);
        for k in 0..count {
            let s = offset + interval * T::from_count(k);
            while s > seg_start + seg_len && seg + 2 < self.points.len() {
                seg_start = seg_start + seg_len;
                seg += 1;
                seg_len = self.points[seg].dist(self.points[seg + 1]);
            }
            let t = ((s - seg_start) / seg_len).min(T::one()).max(T::zero());
            out.push(self.points[seg].lerp(self.points[seg + 1], t));
        }
        Ok(out)
    }
}

/// Free-function form of [`Polyline::resample`].
pub fn resample_polyline<T: Scalar>(line: &Polyline<T>, interval: T) -> Result<Vec<Point<T>>> {
    line.resample(interval)
}

/// Clips a polyline to a polygon, cutting at boundary crossings. Returns the
/// pieces inside the polygon (boundary inclusive) in order along the line.
pub fn clip_polyline<T: Scalar>(line: &Polyline<T>, poly: &IndexedPolygon<T>) -> Vec<Polyline<T>> {
    let mut pieces = Vec::new();
    let mut run: Vec<Point<T>> = Vec::new();
    let half = T::lit(0.5);
    for w in line.points().windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut ts = vec![T::zero()];
        ts.extend(poly.crossings(a, b));
        ts.push(T::one());
        for tw in ts.windows(2) {
            let (t0, t1) = (tw[0], tw[1]);
            if t1 <= t0 {
                continue;
            }
            let mid = a.lerp(b, (t0 + t1) * half);
            if poly.contains(mid) {
                let p0 = if t0 == T::zero() { a } else { a.lerp(b, t0) };
                let p1 = if t1 == T::one() { b } else { a.lerp(b, t1) };
                if run.last() != Some(&p0) {
                    flush(&mut run, &mut pieces);
                    run.push(p0);
                }
                run.push(p1);
            } else {
                flush(&mut run, &mut pieces);
            }
        }
    }
    flush(&mut run, &mut pieces);
    pieces
}

fn flush<T: Scalar>(run: &mut Vec<Point<T>>, out: &mut Vec<Polyline<T>>) {
    if run.len() >= 2 {
        if let Ok(l) = Polyline::new(std::mem::take(run)) {
            out.push(l);
        }
    }
    run.clear();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Polygon;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point<f64> {
        Point::new(x, y)
    }

    fn xs(points: &[Point<f64>]) -> Vec<f64> {
        points.iter().map(|q| q.x).collect()
    }

    #[test]
    fn straight_100m_at_20m() {
        let l = Polyline::new(vec![p(0.0, 0.0), p(100.0, 0.0)]).unwrap();
        let pts = resample_polyline(&l, 20.0).unwrap();
        assert_eq!(xs(&pts), vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0]);
    }

    #[test]
    fn trailing_partial_interval_dropped() {
        let l = Polyline::new(vec![p(0.0, 0.0), p(50.0, 0.0)]).unwrap();
        assert_eq!(xs(&l.resample(20.0).unwrap()), vec![0.0, 20.0, 40.0]);
    }

    #[test]
    fn l_shape_walks_around_the_corner() {
        let l = Polyline::new(vec![p(0.0, 0.0), p(30.0, 0.0), p(30.0, 30.0)]).unwrap();
        let pts = l.resample(20.0).unwrap();
        let expected = [p(0.0, 0.0), p(20.0, 0.0), p(30.0, 10.0), p(30.0, 30.0)];
        assert_eq!(pts.len(), expected.len());
        for (a, b) in pts.iter().zip(expected) {
            assert!(a.dist(b) < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn rejects_bad_interval_and_degenerate_lines() {
        let l = Polyline::new(vec![p(0.0, 0.0), p(10.0, 0.0)]).unwrap();
        assert!(l.resample(0.0).is_err());
        assert!(l.resample(-1.0).is_err());
        assert!(Polyline::new(vec![p(1.0, 1.0), p(1.0, 1.0)]).is_err());
    }

    #[test]
    fn clip_cuts_at_boundary_crossing() {
        let sq = Polygon::rect(p(0.0, 0.0), p(100.0, 100.0)).unwrap().prepare();
        let l = Polyline::new(vec![p(50.0, 50.0), p(150.0, 50.0)]).unwrap();
        let pieces = clip_polyline(&l, &sq);
        assert_eq!(pieces.len(), 1);
        assert!(pieces[0].end().dist(p(100.0, 50.0)) < 1.0);
        let through = Polyline::new(vec![p(-10.0, 20.0), p(110.0, 20.0), p(110.0, 80.0), p(-10.0, 80.0)]).unwrap();
        let pieces = clip_polyline(&through, &sq);
        assert_eq!(pieces.len(), 2);
        assert!((pieces[0].length() - 100.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn spacing_is_exact(pts in prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0), 2..8),
                            interval in 1.0f64..60.0) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| p(x, y)).collect();
            let Ok(line) = Polyline::new(pts) else { return Ok(()) };
            let out = line.resample(interval).unwrap();
            let len = line.length();
            prop_assert_eq!(out.len(), (len / interval + 1e-9).floor() as usize + 1);
            prop_assert_eq!(out[0], line.start());
            // Arc length of each output point, recovered by projecting onto the line.
            let arc = |q: Point<f64>| {
                let mut acc = 0.0;
                let mut best = (f64::INFINITY, 0.0);
                for w in line.points().windows(2) {
                    let seg = w[1] - w[0];
                    let l2 = seg.dot(seg);
                    let t = ((q - w[0]).dot(seg) / l2).clamp(0.0, 1.0);
                    let d = q.dist(w[0].lerp(w[1], t));
                    if d < best.0 { best = (d, acc + t * l2.sqrt()); }
                    acc += l2.sqrt();
                }
                best.1
            };
            for (k, q) in out.iter().enumerate() {
                let expect = interval * k as f64;
                prop_assert!((arc(*q) - expect).abs() <= 1e-9 * len.max(1.0) + 1e-9);
            }
        }
    }
}
