use super::point::Point;
use super::polygon::{Bbox, Polygon};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Unfiltered axis-aligned lattice anchored at `bbox.min`, in row-major order
/// (rows of increasing y, each row of increasing x).
pub fn lattice<T: Scalar>(bbox: Bbox<T>, spacing: T) -> Result<Vec<Point<T>>> {
    if !(spacing > T::zero()) || !spacing.is_finite() {
        return Err(Error::validation(format!(
            "grid spacing must be positive, got {spacing}"
        )));
    }
    if !(bbox.min.x < bbox.max.x && bbox.min.y < bbox.max.y) {
        return Err(Error::validation("degenerate bounding box"));
    }
    let slack = T::lit(1e-9);
    let count = |extent: T| -> Result<usize> {
        (extent / spacing + slack)
            .floor()
            .to_usize()
            .map(|n| n + 1)
            .ok_or_else(|| Error::validation("grid too large"))
    };
    let nx = count(bbox.width())?;
    let ny = count(bbox.height())?;
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = bbox.min.y + spacing * T::from_count(j);
        for i in 0..nx {
            out.push(Point::new(bbox.min.x + spacing * T::from_count(i), y));
        }
    }
    Ok(out)
}

/// Lattice points anchored at the bbox minimum that fall inside `clip`.
pub fn make_point_grid<T: Scalar>(bbox: (Point<T>, Point<T>), spacing: T, clip: &Polygon<T>) -> Result<Vec<Point<T>>> {
    let indexed = clip.prepare();
    Ok(lattice(Bbox::new(bbox.0, bbox.1), spacing)?
        .into_iter()
        .filter(|&p| indexed.contains(p))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point<f64> {
        Point::new(x, y)
    }

    #[test]
    fn counts_match_arithmetic() {
        let sq = Polygon::rect(p(0.0, 0.0), p(100.0, 100.0)).unwrap();
        assert_eq!(
            make_point_grid((p(0.0, 0.0), p(100.0, 100.0)), 20.0, &sq)
                .unwrap()
                .len(),
            36
        );
        let km = Polygon::rect(p(0.0, 0.0), p(1000.0, 1000.0)).unwrap();
        assert_eq!(
            make_point_grid((p(0.0, 0.0), p(1000.0, 1000.0)), 20.0, &km)
                .unwrap()
                .len(),
            2601
        );
    }

    #[test]
    fn left_half_clip() {
        let half = Polygon::rect(p(0.0, 0.0), p(50.0, 100.0)).unwrap();
        let pts = make_point_grid((p(0.0, 0.0), p(100.0, 100.0)), 20.0, &half).unwrap();
        assert_eq!(pts.len(), 18);
        assert!(pts.iter().all(|q| [0.0, 20.0, 40.0].contains(&q.x)));
    }

    #[test]
    fn subset_of_lattice_and_inside() {
        let tri = Polygon::new(vec![p(0.0, 0.0), p(300.0, 0.0), p(0.0, 250.0)], vec![]).unwrap();
        let bb = tri.bbox();
        let all = lattice(bb, 17.0).unwrap();
        let kept = make_point_grid((bb.min, bb.max), 17.0, &tri).unwrap();
        assert!(kept.len() < all.len());
        assert!(kept.iter().all(|q| all.contains(q) && tri.contains(*q)));
    }

    #[test]
    fn rejects_bad_inputs() {
        let sq = Polygon::rect(p(0.0, 0.0), p(1.0, 1.0)).unwrap();
        assert!(make_point_grid((p(0.0, 0.0), p(0.0, 1.0)), 0.1, &sq).is_err());
        assert!(make_point_grid((p(0.0, 0.0), p(1.0, 1.0)), 0.0, &sq).is_err());
    }
}
