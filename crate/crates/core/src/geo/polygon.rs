use serde::{Deserialize, Serialize};

use super::point::Point;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bbox<T> {
    pub min: Point<T>,
    pub max: Point<T>,
}

impl<T: Scalar> Bbox<T> {
    pub fn new(min: Point<T>, max: Point<T>) -> Self {
        Bbox { min, max }
    }

    /// Smallest box containing all points; `None` for an empty input.
    pub fn of_points<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a Point<T>>,
    {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Bbox::new(first, first);
        for p in it {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> T {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> T {
        self.max.y - self.min.y
    }

    pub fn union(&self, other: &Self) -> Self {
        Bbox::new(
            Point::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            Point::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        )
    }

    pub fn padded(&self, pad: T) -> Self {
        Bbox::new(
            Point::new(self.min.x - pad, self.min.y - pad),
            Point::new(self.max.x + pad, self.max.y + pad),
        )
    }

    pub fn contains(&self, p: Point<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.min.x <= other.max.x && other.min.x <= self.max.x && self.min.y <= other.max.y && other.min.y <= self.max.y
    }
}

/// Simple polygon with optional holes. Rings are stored closed (first vertex
/// repeated at the end), the exterior counter-clockwise and holes clockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon<T> {
    exterior: Vec<Point<T>>,
    holes: Vec<Vec<Point<T>>>,
    bbox: Bbox<T>,
    tol: T,
}

fn signed_area<T: Scalar>(ring: &[Point<T>]) -> T {
    let mut acc = T::zero();
    for w in ring.windows(2) {
        acc = acc + w[0].cross(w[1]);
    }
    acc * T::lit(0.5)
}

fn close_ring<T: Scalar>(mut ring: Vec<Point<T>>, what: &str) -> Result<Vec<Point<T>>> {
    if ring.iter().any(|p| !p.is_finite()) {
        return Err(Error::validation(format!("{what} ring has non-finite vertex")));
    }
    ring.dedup();
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(Error::validation(format!(
            "{what} ring needs at least 3 distinct vertices"
        )));
    }
    ring.push(ring[0]);
    Ok(ring)
}

impl<T: Scalar> Polygon<T> {
    /// Validates and normalizes a polygon. Open rings are closed and ring
    /// orientation is fixed up; zero-area or self-intersecting rings are rejected.
    pub fn new(exterior: Vec<Point<T>>, holes: Vec<Vec<Point<T>>>) -> Result<Self> {
        let mut exterior = close_ring(exterior, "exterior")?;
        let ext_area = signed_area(&exterior);
        if ext_area == T::zero() {
            return Err(Error::validation("polygon has zero area"));
        }
        if ext_area < T::zero() {
            exterior.reverse();
        }
        let mut fixed_holes = Vec::with_capacity(holes.len());
        for h in holes {
            let mut h = close_ring(h, "hole")?;
            let a = signed_area(&h);
            if a == T::zero() {
                return Err(Error::validation("hole has zero area"));
            }
            if a > T::zero() {
                h.reverse();
            }
            fixed_holes.push(h);
        }
        let bbox = Bbox::of_points(&exterior).expect("non-empty ring");
        let scale = bbox
            .min
            .x
            .abs()
            .max(bbox.min.y.abs())
            .max(bbox.max.x.abs())
            .max(bbox.max.y.abs())
            .max(bbox.width())
            .max(bbox.height())
            .max(T::one());
        let poly = Polygon {
            exterior,
            holes: fixed_holes,
            bbox,
            tol: T::epsilon() * T::lit(64.0) * scale,
        };
        poly.check_simple()?;
        for h in &poly.holes {
            if !ring_parity(&poly.exterior, h[0]) {
                return Err(Error::validation("hole lies outside the exterior ring"));
            }
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle polygon.
    pub fn rect(min: Point<T>, max: Point<T>) -> Result<Self> {
        Polygon::new(
            vec![min, Point::new(max.x, min.y), max, Point::new(min.x, max.y)],
            vec![],
        )
    }

    pub fn exterior(&self) -> &[Point<T>] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<Point<T>>] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point<T>]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    pub fn bbox(&self) -> Bbox<T> {
        self.bbox
    }

    /// Tolerance used for boundary membership, scaled to the coordinate magnitude.
    pub fn boundary_tolerance(&self) -> T {
        self.tol
    }

    pub fn area(&self) -> T {
        self.holes
            .iter()
            .fold(signed_area(&self.exterior), |acc, h| acc + signed_area(h))
    }

    /// Area centroid of the exterior ring.
    pub fn centroid(&self) -> Point<T> {
        let mut cx = T::zero();
        let mut cy = T::zero();
        let o = self.exterior[0];
        for w in self.exterior.windows(2) {
            let (a, b) = (w[0] - o, w[1] - o);
            let c = a.cross(b);
            cx = cx + (a.x + b.x) * c;
            cy = cy + (a.y + b.y) * c;
        }
        let six_a = signed_area(&self.exterior) * T::lit(6.0);
        Point::new(o.x + cx / six_a, o.y + cy / six_a)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point<T>, Point<T>)> + '_ {
        self.rings().flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
    }

    pub fn num_edges(&self) -> usize {
        self.rings().map(|r| r.len() - 1).sum()
    }

    /// Boundary-inclusive containment; points inside holes are excluded.
    pub fn contains(&self, p: Point<T>) -> bool {
        point_in_polygon(p, self)
    }

    pub fn prepare(&self) -> IndexedPolygon<T> {
        IndexedPolygon::new(self.clone())
    }

    /// Area of the intersection of this polygon with an axis-aligned box.
    pub fn rect_overlap_area(&self, rect: &Bbox<T>) -> T {
        if !self.bbox.intersects(rect) {
            return T::zero();
        }
        let mut area = signed_area(&clip_ring_to_rect(&self.exterior, rect)).abs();
        for h in &self.holes {
            area = area - signed_area(&clip_ring_to_rect(h, rect)).abs();
        }
        area.max(T::zero())
    }

    fn check_simple(&self) -> Result<()> {
        struct Seg<T> {
            ring: usize,
            idx: usize,
            len: usize,
            a: Point<T>,
            b: Point<T>,
            min_x: T,
            max_x: T,
        }
        let mut segs = Vec::new();
        for (ri, ring) in self.rings().enumerate() {
            let len = ring.len() - 1;
            for (idx, w) in ring.windows(2).enumerate() {
                segs.push(Seg {
                    ring: ri,
                    idx,
                    len,
                    a: w[0],
                    b: w[1],
                    min_x: w[0].x.min(w[1].x),
                    max_x: w[0].x.max(w[1].x),
                });
            }
        }
        segs.sort_by(|s, t| s.min_x.partial_cmp(&t.min_x).expect("finite"));
        for i in 0..segs.len() {
            let s = &segs[i];
            for t in &segs[i + 1..] {
                if t.min_x > s.max_x {
                    break;
                }
                if s.ring == t.ring {
                    let d = s.idx.abs_diff(t.idx);
                    if d == 1 || d == s.len - 1 {
                        // Adjacent edges share a vertex; only a collinear fold-back is invalid.
                        let (shared, p, q) = if s.b == t.a { (s.b, s.a, t.b) } else { (s.a, s.b, t.a) };
                        let u = p - shared;
                        let v = q - shared;
                        if u.cross(v) == T::zero() && u.dot(v) > T::zero() {
                            return Err(Error::validation("polygon ring folds back on itself"));
                        }
                        continue;
                    }
                }
                if segments_intersect(s.a, s.b, t.a, t.b) {
                    return Err(Error::validation(if s.ring == t.ring {
                        "polygon ring self-intersects"
                    } else {
                        "polygon rings intersect each other"
                    }));
                }
            }
        }
        Ok(())
    }
}

fn orient<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>) -> T {
    (b - a).cross(c - a)
}

fn within_box<T: Scalar>(a: Point<T>, b: Point<T>, p: Point<T>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub(crate) fn segments_intersect<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>, d: Point<T>) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    let z = T::zero();
    if ((o1 > z && o2 < z) || (o1 < z && o2 > z)) && ((o3 > z && o4 < z) || (o3 < z && o4 > z)) {
        return true;
    }
    (o1 == z && within_box(a, b, c))
        || (o2 == z && within_box(a, b, d))
        || (o3 == z && within_box(c, d, a))
        || (o4 == z && within_box(c, d, b))
}

/// Parameter `t` along `a→b` where it properly crosses `c→d`, if it does.
pub(crate) fn segment_crossing_param<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>, d: Point<T>) -> Option<T> {
    let r = b - a;
    let s = d - c;
    let denom = r.cross(s);
    if denom == T::zero() {
        return None;
    }
    let ac = c - a;
    let t = ac.cross(s) / denom;
    let u = ac.cross(r) / denom;
    let (z, o) = (T::zero(), T::one());
    if t >= z && t <= o && u >= z && u <= o {
        Some(t)
    } else {
        None
    }
}

#[inline]
fn on_segment<T: Scalar>(p: Point<T>, a: Point<T>, b: Point<T>, tol: T) -> bool {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > T::zero() {
        ((p - a).dot(ab) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    p.dist2(a.lerp(b, t)) <= tol * tol
}

#[inline]
fn crosses_ray<T: Scalar>(p: Point<T>, a: Point<T>, b: Point<T>) -> bool {
    if (a.y > p.y) != (b.y > p.y) {
        let x_int = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        p.x < x_int
    } else {
        false
    }
}

fn ring_parity<T: Scalar>(ring: &[Point<T>], p: Point<T>) -> bool {
    ring.windows(2).filter(|w| crosses_ray(p, w[0], w[1])).count() % 2 == 1
}

/// Ray-casting containment. Points on any ring boundary count as inside.
pub fn point_in_polygon<T: Scalar>(p: Point<T>, poly: &Polygon<T>) -> bool {
    let tol = poly.tol;
    if !poly.bbox.padded(tol).contains(p) {
        return false;
    }
    let mut inside = false;
    for (a, b) in poly.edges() {
        if on_segment(p, a, b, tol) {
            return true;
        }
        if crosses_ray(p, a, b) {
            inside = !inside;
        }
    }
    inside
}

/// Sutherland–Hodgman clip of a closed ring against a box. Returns a closed ring
/// (possibly degenerate) whose absolute signed area is the overlap area.
fn clip_ring_to_rect<T: Scalar>(ring: &[Point<T>], rect: &Bbox<T>) -> Vec<Point<T>> {
    let mut poly: Vec<Point<T>> = ring[..ring.len() - 1].to_vec();
    // (axis, bound, keep_greater)
    let planes = [
        (0, rect.min.x, true),
        (0, rect.max.x, false),
        (1, rect.min.y, true),
        (1, rect.max.y, false),
    ];
    for (axis, bound, greater) in planes {
        if poly.is_empty() {
            break;
        }
        let coord = |p: &Point<T>| if axis == 0 { p.x } else { p.y };
        let inside = |p: &Point<T>| {
            if greater {
                coord(p) >= bound
            } else {
                coord(p) <= bound
            }
        };
        let mut out = Vec::with_capacity(poly.len() + 4);
        for i in 0..poly.len() {
            let cur = poly[i];
            let prev = poly[(i + poly.len() - 1) % poly.len()];
            let (ci, pi) = (inside(&cur), inside(&prev));
            if ci != pi {
                let t = (bound - coord(&prev)) / (coord(&cur) - coord(&prev));
                let mut x = prev.lerp(cur, t);
                if axis == 0 {
                    x.x = bound;
                } else {
                    x.y = bound;
                }
                out.push(x);
            }
            if ci {
                out.push(cur);
            }
        }
        poly = out;
    }
    if let Some(&first) = poly.first() {
        poly.push(first);
    }
    poly
}

/// Polygon with a horizontal band index over its edges, for fast repeated
/// containment and segment-crossing queries.
#[derive(Clone, Debug)]
pub struct IndexedPolygon<T> {
    poly: Polygon<T>,
    edges: Vec<(Point<T>, Point<T>)>,
    bands: Vec<Vec<u32>>,
    y0: T,
    band_h: T,
}

impl<T: Scalar> IndexedPolygon<T> {
    pub fn new(poly: Polygon<T>) -> Self {
        let edges: Vec<_> = poly.edges().collect();
        let bb = poly.bbox;
        let nb = (edges.len() / 4).clamp(1, 8192);
        let tol = poly.tol;
        let span = bb.height() + tol * T::lit(2.0);
        let y0 = bb.min.y - tol;
        let band_h = span / T::from_count(nb);
        let mut bands = vec![Vec::new(); nb];
        for (i, &(a, b)) in edges.iter().enumerate() {
            let lo = a.y.min(b.y) - tol;
            let hi = a.y.max(b.y) + tol;
            let (bl, bh) = (band_of(lo, y0, band_h, nb), band_of(hi, y0, band_h, nb));
            for band in &mut bands[bl..=bh] {
                band.push(i as u32);
            }
        }
        IndexedPolygon {
            poly,
            edges,
            bands,
            y0,
            band_h,
        }
    }

    pub fn polygon(&self) -> &Polygon<T> {
        &self.poly
    }

    fn band(&self, y: T) -> usize {
        band_of(y, self.y0, self.band_h, self.bands.len())
    }

    /// Same semantics as [`point_in_polygon`].
    pub fn contains(&self, p: Point<T>) -> bool {
        let tol = self.poly.tol;
        if !self.poly.bbox.padded(tol).contains(p) {
            return false;
        }
        let mut inside = false;
        for &ei in &self.bands[self.band(p.y)] {
            let (a, b) = self.edges[ei as usize];
            if on_segment(p, a, b, tol) {
                return true;
            }
            if crosses_ray(p, a, b) {
                inside = !inside;
            }
        }
        inside
    }

    /// Sorted parameters in (0, 1) where segment `a→b` crosses the boundary.
    pub fn crossings(&self, a: Point<T>, b: Point<T>) -> Vec<T> {
        let lo = self.band(a.y.min(b.y));
        let hi = self.band(a.y.max(b.y));
        let mut cand: Vec<u32> = self.bands[lo..=hi].iter().flatten().copied().collect();
        if hi > lo {
            cand.sort_unstable();
            cand.dedup();
        }
        let mut ts: Vec<T> = cand
            .into_iter()
            .filter_map(|ei| {
                let (c, d) = self.edges[ei as usize];
                segment_crossing_param(a, b, c, d)
            })
            .filter(|&t| t > T::zero() && t < T::one())
            .collect();
        ts.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        ts.dedup();
        ts
    }

    /// True when the segment touches the polygon (an endpoint inside or a crossing).
    pub fn segment_touches(&self, a: Point<T>, b: Point<T>) -> bool {
        self.contains(a) || self.contains(b) || !self.crossings(a, b).is_empty()
    }
}

fn band_of<T: Scalar>(y: T, y0: T, h: T, nb: usize) -> usize {
    let f = ((y - y0) / h).floor();
    if f <= T::zero() || f.is_nan() {
        0
    } else {
        f.to_usize().unwrap_or(nb - 1).min(nb - 1)
    }
}
