use crate::geo::Point;
use crate::scalar::Scalar;

const LEAF_SIZE: usize = 8;

/// Static 2-D kd-tree with exact k-nearest-neighbour queries.
///
/// Points are stored permuted in an implicit median layout: the subtree over
/// `[lo, hi)` has its splitting point at `(lo + hi) / 2`.
#[derive(Clone, Debug)]
pub struct KdTree<T> {
    points: Vec<Point<T>>,
    index: Vec<usize>,
    axis: Vec<u8>,
}

impl<T: Scalar> KdTree<T> {
    pub fn new(points: &[Point<T>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axis = vec![0u8; points.len()];
        build(points, &mut order, &mut axis, 0);
        KdTree {
            points: order.iter().map(|&i| points[i]).collect(),
            index: order,
            axis,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point as `(original index, distance)`.
    pub fn nearest(&self, q: Point<T>) -> Option<(usize, T)> {
        self.knn(q, 1, None).pop().map(|(i, d2)| (i, d2.sqrt()))
    }

    /// The `k` nearest points to `q` as `(original index, squared distance)`,
    /// nearest first. `exclude` skips one original index (the query itself).
    pub fn knn(&self, q: Point<T>, k: usize, exclude: Option<usize>) -> Vec<(usize, T)> {
        let mut best = Best::new(k);
        if k > 0 {
            self.search(q, 0, self.points.len(), exclude, &mut best);
        }
        best.items
    }

    /// Distance to the k-th nearest neighbour (1-based `k`).
    pub fn kth_distance(&self, q: Point<T>, k: usize, exclude: Option<usize>) -> Option<T> {
        let found = self.knn(q, k, exclude);
        (found.len() == k).then(|| found[k - 1].1.sqrt())
    }

    fn search(&self, q: Point<T>, lo: usize, hi: usize, exclude: Option<usize>, best: &mut Best<T>) {
        if hi - lo <= LEAF_SIZE {
            for i in lo..hi {
                if Some(self.index[i]) != exclude {
                    best.offer(self.index[i], q.dist2(self.points[i]));
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let p = self.points[mid];
        if Some(self.index[mid]) != exclude {
            best.offer(self.index[mid], q.dist2(p));
        }
        let diff = if self.axis[mid] == 0 { q.x - p.x } else { q.y - p.y };
        let (near, far) = if diff < T::zero() {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, exclude, best);
        if best.accepts(diff * diff) {
            self.search(q, far.0, far.1, exclude, best);
        }
    }
}

fn build<T: Scalar>(points: &[Point<T>], order: &mut [usize], axis: &mut [u8], offset: usize) {
    let n = order.len();
    if n <= LEAF_SIZE {
        return;
    }
    let (mut min_x, mut max_x, mut min_y, mut max_y) =
        (T::infinity(), T::neg_infinity(), T::infinity(), T::neg_infinity());
    for &i in order.iter() {
        let p = points[i];
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_y = min_y.min(p.y);
        max_y = max_y.max(p.y);
    }
    let ax = u8::from(max_y - min_y > max_x - min_x);
    let key = |i: &usize| if ax == 0 { points[*i].x } else { points[*i].y };
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |a, b| key(a).partial_cmp(&key(b)).expect("finite coordinates"));
    axis[offset + mid] = ax;
    let (left, rest) = order.split_at_mut(mid);
    build(points, left, axis, offset);
    build(points, &mut rest[1..], axis, offset + mid + 1);
}

/// Bounded sorted list of the best candidates seen so far.
struct Best<T> {
    k: usize,
    items: Vec<(usize, T)>,
}

impl<T: Scalar> Best<T> {
    fn new(k: usize) -> Self {
        Best {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    fn accepts(&self, d2: T) -> bool {
        self.items.len() < self.k || d2 < self.items[self.items.len() - 1].1
    }

    #[inline]
    fn offer(&mut self, idx: usize, d2: T) {
        if !self.accepts(d2) {
            return;
        }
        let pos = self.items.partition_point(|&(_, d)| d <= d2);
        self.items.insert(pos, (idx, d2));
        self.items.truncate(self.k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_kth(points: &[Point<f64>], q: Point<f64>, k: usize, exclude: Option<usize>) -> Option<f64> {
        let mut d: Vec<f64> = points
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(_, p)| p.dist(q))
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d.get(k - 1).copied()
    }

    #[test]
    fn empty_tree() {
        let t = KdTree::<f64>::new(&[]);
        assert!(t.nearest(Point::new(0.0, 0.0)).is_none());
    }

    #[test]
    fn self_exclusion() {
        let pts: Vec<_> = (0..50).map(|i| Point::new(i as f64 * 3.0, 0.0)).collect();
        let t = KdTree::new(&pts);
        assert_eq!(t.kth_distance(pts[10], 1, Some(10)), Some(3.0));
        assert_eq!(t.kth_distance(pts[10], 2, Some(10)), Some(3.0));
        assert_eq!(t.kth_distance(pts[10], 3, Some(10)), Some(6.0));
        assert_eq!(t.kth_distance(pts[10], 1, None), Some(0.0));
    }

    proptest! {
        #[test]
        fn matches_brute_force(pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..300),
                               qs in prop::collection::vec((-120.0f64..120.0, -120.0f64..120.0), 1..20),
                               k in 1usize..6) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
            let t = KdTree::new(&pts);
            for (x, y) in qs {
                let q = Point::new(x, y);
                prop_assert_eq!(t.kth_distance(q, k, None), brute_kth(&pts, q, k, None));
            }
            for i in (0..pts.len()).step_by(7) {
                prop_assert_eq!(t.kth_distance(pts[i], k, Some(i)), brute_kth(&pts, pts[i], k, Some(i)));
            }
        }
    }
}
