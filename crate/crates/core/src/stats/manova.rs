use rayon::prelude::*;
use serde::Serialize;

use super::special::f_sf;
use crate::density::SamplePoints;
use crate::error::{Error, Result};
use crate::geo::Point;
use crate::scalar::Scalar;

/// Points per partial sum; fixed so the reduction order does not depend on threads.
const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ManovaPValues<T> {
    pub wilks: T,
    pub pillai: T,
    pub hotelling_lawley: T,
    pub roy: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManovaResult<T> {
    pub wilks_lambda: T,
    pub pillai_trace: T,
    pub hotelling_lawley: T,
    /// Largest eigenvalue of `HE⁻¹`.
    pub roys_root: T,
    pub p_values: ManovaPValues<T>,
    pub n1: usize,
    pub n2: usize,
    pub d: usize,
}

impl<T: Scalar> ManovaResult<T> {
    pub const CSV_HEADER: &'static str =
        "city,provider,wilks,wilks_p,pillai,pillai_p,hotelling_lawley,hotelling_lawley_p,roy,roy_p,n1,n2";

    /// One CSV row in the appendix layout: value then p-value per statistic.
    /// Statistics carry 6 decimals, p-values 3.
    pub fn csv_row(&self, city: &str, provider: &str) -> String {
        format!(
            "{city},{provider},{:.6},{:.3},{:.6},{:.3},{:.6},{:.3},{:.6},{:.3},{},{}",
            self.wilks_lambda.as_f64(),
            self.p_values.wilks.as_f64(),
            self.pillai_trace.as_f64(),
            self.p_values.pillai.as_f64(),
            self.hotelling_lawley.as_f64(),
            self.p_values.hotelling_lawley.as_f64(),
            self.roys_root.as_f64(),
            self.p_values.roy.as_f64(),
            self.n1,
            self.n2
        )
    }
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Sym2<T> {
    xx: T,
    xy: T,
    yy: T,
}

impl<T: Scalar> Sym2<T> {
    fn zero() -> Self {
        Sym2 {
            xx: T::zero(),
            xy: T::zero(),
            yy: T::zero(),
        }
    }

    fn add(self, o: Self) -> Self {
        Sym2 {
            xx: self.xx + o.xx,
            xy: self.xy + o.xy,
            yy: self.yy + o.yy,
        }
    }

    fn det(self) -> T {
        self.xx * self.yy - self.xy * self.xy
    }

    fn trace(self) -> T {
        self.xx + self.yy
    }
}

fn mean<T: Scalar>(pts: &[Point<T>]) -> Point<T> {
    let partial: Vec<(T, T)> = pts
        .par_chunks(CHUNK)
        .map(|c| {
            c.iter()
                .fold((T::zero(), T::zero()), |(sx, sy), p| (sx + p.x, sy + p.y))
        })
        .collect();
    let (sx, sy) = partial
        .into_iter()
        .fold((T::zero(), T::zero()), |(a, b), (c, d)| (a + c, b + d));
    let n = T::from_count(pts.len());
    Point::new(sx / n, sy / n)
}

/// Within-group SSCP about the group mean.
fn sscp<T: Scalar>(pts: &[Point<T>], m: Point<T>) -> Sym2<T> {
    let partial: Vec<Sym2<T>> = pts
        .par_chunks(CHUNK)
        .map(|c| {
            c.iter().fold(Sym2::zero(), |acc, p| {
                let (dx, dy) = (p.x - m.x, p.y - m.y);
                acc.add(Sym2 {
                    xx: dx * dx,
                    xy: dx * dy,
                    yy: dy * dy,
                })
            })
        })
        .collect();
    partial.into_iter().fold(Sym2::zero(), Sym2::add)
}

/// Two-group MANOVA on planar coordinates with group labels used in errors.
pub fn manova_two_group_named<T: Scalar>(
    a: &[Point<T>],
    a_name: &str,
    b: &[Point<T>],
    b_name: &str,
) -> Result<ManovaResult<T>> {
    for (g, name) in [(a, a_name), (b, b_name)] {
        if g.len() < 3 {
            return Err(Error::validation(format!(
                "MANOVA group `{name}` needs at least 3 points, has {}",
                g.len()
            )));
        }
    }
    let (n1, n2) = (a.len(), b.len());
    let (ma, mb) = (mean(a), mean(b));
    let (ea, eb) = (sscp(a, ma), sscp(b, mb));
    let e = ea.add(eb);
    // Singularity relative to the scale of E.
    let scale = e.trace() * e.trace();
    if !(e.det() > T::lit(1e-12) * scale) {
        // Both groups are rank-deficient here; blame the lower-rank one.
        let rank = |s: Sym2<T>| {
            if !(s.trace() > T::zero()) {
                0
            } else if !(s.det() > T::lit(1e-12) * s.trace() * s.trace()) {
                1
            } else {
                2
            }
        };
        let name = match rank(ea).cmp(&rank(eb)) {
            std::cmp::Ordering::Less => a_name.to_string(),
            std::cmp::Ordering::Greater => b_name.to_string(),
            std::cmp::Ordering::Equal => format!("{a_name} and {b_name}"),
        };
        return Err(Error::Degenerate { group: name });
    }
    let nt = T::from_count(n1 + n2);
    let w = T::from_count(n1) * T::from_count(n2) / nt;
    let (dx, dy) = (ma.x - mb.x, ma.y - mb.y);
    let h = Sym2 {
        xx: w * dx * dx,
        xy: w * dx * dy,
        yy: w * dy * dy,
    };
    let he = h.add(e);

    let det_e = e.det();
    let wilks = det_e / he.det();
    // tr(H·M⁻¹) for symmetric 2×2 M: (h·adj(M)) / det M.
    let tr_ratio = |m: Sym2<T>| (h.xx * m.yy - T::lit(2.0) * h.xy * m.xy + h.yy * m.xx) / m.det();
    let pillai = tr_ratio(he);
    let hotelling = tr_ratio(e);
    // Eigenvalues of HE⁻¹: trace and determinant of the 2×2 product.
    let det_h_e = h.det() / det_e;
    let disc = (hotelling * hotelling - T::lit(4.0) * det_h_e).max(T::zero());
    let roy = (hotelling + disc.sqrt()) * T::lit(0.5);

    let p_values = p_values(wilks, pillai, hotelling, roy, n1 + n2);
    Ok(ManovaResult {
        wilks_lambda: wilks,
        pillai_trace: pillai,
        hotelling_lawley: hotelling,
        roys_root: roy,
        p_values,
        n1,
        n2,
        d: 2,
    })
}

pub fn manova_two_group<T: Scalar>(a: &SamplePoints<T>, b: &SamplePoints<T>) -> Result<ManovaResult<T>> {
    manova_two_group_named(a.points(), "A", b.points(), "B")
}

/// F approximations for p = 2 response variables and q = 1 hypothesis degree
/// of freedom with v = N − 2 error degrees of freedom.
fn p_values<T: Scalar>(wilks: T, pillai: T, hotelling: T, roy: T, n_total: usize) -> ManovaPValues<T> {
    let c = |v: f64| T::lit(v);
    let (p, q) = (2.0, 1.0);
    let v = n_total as f64 - 2.0;
    let s = f64::min(p, q);
    let m = ((p - q).abs() - 1.0) / 2.0;
    let n = (v - p - 1.0) / 2.0;

    // Rao's F for Wilks' lambda.
    let r = v - (p - q + 1.0) / 2.0;
    let u = (p * q - 2.0) / 4.0;
    let df1 = p * q;
    let t = if p * p + q * q - 5.0 > 0.0 {
        ((p * p * q * q - 4.0) / (p * p + q * q - 5.0)).sqrt()
    } else {
        1.0
    };
    let df2 = r * t - 2.0 * u;
    let lt = wilks.powf(c(1.0 / t));
    let f = (T::one() - lt) / lt * c(df2 / df1);
    let wilks_p = f_sf(f, c(df1), c(df2));

    let df1 = s * (2.0 * m + s + 1.0);
    let df2 = s * (2.0 * n + s + 1.0);
    let f = c(df2 / df1) * pillai / (c(s) - pillai);
    let pillai_p = f_sf(f, c(df1), c(df2));

    let hotelling_p = if n > 0.0 {
        let b = (p + 2.0 * n) * (q + 2.0 * n) / 2.0 / (2.0 * n + 1.0) / (n - 1.0);
        let df1 = p * q;
        let df2 = 4.0 + (p * q + 2.0) / (b - 1.0);
        let cc = (df2 - 2.0) / 2.0 / n;
        f_sf(c(df2 / df1) * hotelling / c(cc), c(df1), c(df2))
    } else {
        let df1 = s * (2.0 * m + s + 1.0);
        let df2 = s * (s * n + 1.0);
        f_sf(c(df2 / df1 / s) * hotelling, c(df1), c(df2))
    };

    let rr = f64::max(p, q);
    let df1 = rr;
    let df2 = v - rr + q;
    let roy_p = f_sf(c(df2 / df1) * roy, c(df1), c(df2));

    ManovaPValues {
        wilks: wilks_p,
        pillai: pillai_p,
        hotelling_lawley: hotelling_p,
        roy: roy_p,
    }
}
