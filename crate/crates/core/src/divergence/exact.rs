use crate::error::{Error, Result};
use crate::geo::Point;
use crate::scalar::Scalar;

/// Largest instance accepted by [`exact_ot`].
pub const EXACT_OT_MAX_POINTS: usize = 256;

/// Exact Wasserstein-p distance between two equal-size uniform point sets:
/// `((1/n)·Σ ‖xᵢ − y_σ(i)‖^p)^(1/p)` for the optimal assignment `σ`.
pub fn exact_ot<T: Scalar>(x: &[Point<T>], y: &[Point<T>], p: u32) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "exact OT needs equal sizes, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() > EXACT_OT_MAX_POINTS {
        return Err(Error::validation(format!(
            "exact OT limited to {EXACT_OT_MAX_POINTS} points"
        )));
    }
    if p == 0 {
        return Err(Error::validation("transport order p must be positive"));
    }
    if x.is_empty() {
        return Ok(T::zero());
    }
    let pf = T::from_count(p as usize);
    let cost: Vec<Vec<T>> = x
        .iter()
        .map(|&a| {
            y.iter()
                .map(|&b| if p == 1 { a.dist(b) } else { a.dist(b).powf(pf) })
                .collect()
        })
        .collect();
    let assignment = hungarian(&cost);
    let total: T = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok((total / T::from_count(x.len())).powf(T::one() / pf))
}

/// Minimum-cost perfect matching on a square cost matrix by shortest
/// augmenting paths with dual potentials. Returns the column of each row.
pub fn hungarian<T: Scalar>(cost: &[Vec<T>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays; column 0 is the virtual source.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![T::infinity(); n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = T::infinity();
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] = u[row_of[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point<f64>> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn spec_examples() {
        let x = pts(&[(0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(exact_ot(&x, &x, 1).unwrap(), 0.0);
        assert_eq!(exact_ot(&x, &pts(&[(1.0, 0.0), (0.0, 0.0)]), 1).unwrap(), 0.0);
        assert_eq!(exact_ot(&x, &pts(&[(0.0, 1.0), (1.0, 1.0)]), 1).unwrap(), 1.0);
        assert!(exact_ot(&x, &pts(&[(0.0, 1.0)]), 1).is_err());
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for perm in permutations(n - 1) {
            for pos in 0..=perm.len() {
                let mut p = perm.clone();
                p.insert(pos, n - 1);
                out.push(p);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            coords in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..=7),
            p in 1u32..=2,
        ) {
            let x: Vec<_> = coords.iter().map(|c| Point::new(c.0, c.1)).collect();
            let y: Vec<_> = coords.iter().map(|c| Point::new(c.2, c.3)).collect();
            let n = x.len();
            let best = permutations(n)
                .into_iter()
                .map(|perm| perm.iter().enumerate().map(|(i, &j)| x[i].dist(y[j]).powi(p as i32)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let expected = (best / n as f64).powf(1.0 / p as f64);
            let got = exact_ot(&x, &y, p).unwrap();
            prop_assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }
}
