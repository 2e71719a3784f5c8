use std::collections::HashMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::SamplePoints;
use crate::error::{Error, Result};
use crate::geo::{Bbox, Point};
use crate::scalar::Scalar;

/// Cost matrices up to this many entries are stored; larger problems
/// recompute costs on the fly.
const DENSE_COST_LIMIT: usize = 1 << 22;
/// Iteration cap for each intermediate blur of the annealing schedule.
const STAGE_ITERS: usize = 10;
/// Over-relaxation factor at the target blur.
const RELAXATION: f64 = 1.8;
/// Softmin terms below e^-40 of the row maximum are skipped; the relative
/// error of the row sum stays below m·4e-18.
const SOFTMIN_CUTOFF: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SinkhornConfig {
    /// Target blur (length units of the working frame); ε = blur^p.
    pub blur: f64,
    /// Transport order, 1 or 2.
    pub p: u32,
    /// Iteration cap at the target blur.
    pub max_iters: usize,
    /// Stop once both potentials move less than this (sup norm, cost units).
    pub tol: f64,
    /// Larger sample sets are subsampled uniformly to this size.
    pub max_points: usize,
    pub seed: u64,
    /// Work in the unit square of the joint bbox (isotropic scaling) instead of raw units.
    pub normalize: bool,
    /// First blur of the annealing schedule, relative to the frame diameter.
    pub initial_blur: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            blur: 0.01,
            p: 1,
            max_iters: 500,
            tol: 1e-6,
            max_points: 50_000,
            seed: 0,
            normalize: true,
            initial_blur: 0.5,
        }
    }
}

impl SinkhornConfig {
    fn validate(&self) -> Result<()> {
        if !(self.blur > 0.0) || !self.blur.is_finite() {
            return Err(Error::validation(format!("blur must be positive, got {}", self.blur)));
        }
        if !matches!(self.p, 1 | 2) {
            return Err(Error::validation(format!(
                "transport order p must be 1 or 2, got {}",
                self.p
            )));
        }
        if self.max_points < 2 {
            return Err(Error::validation("max_points must be at least 2"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::validation("tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SinkhornResult<T> {
    /// `max(S, 0)^(1/p)`.
    pub value: T,
    /// The debiased divergence `S_ε` before clamping and root.
    pub divergence: T,
    pub converged: bool,
    /// Largest potential update in the last iteration of any of the three problems.
    pub dual_gap: T,
    pub iterations: usize,
    pub n_used: usize,
    pub m_used: usize,
}

/// Debiased Sinkhorn divergence `S_ε(α, β) = OT_ε(α, β) − ½OT_ε(α, α) − ½OT_ε(β, β)`
/// between the (weighted) sample sets, returned as `S^(1/p)`.
pub fn sinkhorn_emd<T: Scalar>(
    x: &SamplePoints<T>,
    y: &SamplePoints<T>,
    cfg: &SinkhornConfig,
) -> Result<SinkhornResult<T>> {
    cfg.validate()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::validation("Sinkhorn needs two non-empty sample sets"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (xp, xw) = subsample(x, cfg.max_points, &mut rng);
    let (yp, yw) = subsample(y, cfg.max_points, &mut rng);
    let (n_used, m_used) = (xp.len(), yp.len());
    let (xp, a) = merge_duplicates(&xp, &xw);
    let (yp, b) = merge_duplicates(&yp, &yw);

    let bb = Bbox::of_points(xp.iter().chain(&yp)).expect("non-empty");
    let diameter = bb.width().max(bb.height());
    let zero = SinkhornResult {
        value: T::zero(),
        divergence: T::zero(),
        converged: true,
        dual_gap: T::zero(),
        iterations: 0,
        n_used,
        m_used,
    };
    if diameter == T::zero() {
        return Ok(zero);
    }
    let (xs, ys, scale) = if cfg.normalize {
        let f = |p: &Point<T>| Point::new((p.x - bb.min.x) / diameter, (p.y - bb.min.y) / diameter);
        (xp.iter().map(f).collect(), yp.iter().map(f).collect(), T::one())
    } else {
        (xp, yp, diameter)
    };

    let solver = Solver::new(cfg, scale);
    let aa = solver.solve_self(&xs, &a);
    let bb_ = solver.solve_self(&ys, &b);
    // Identical measures share the self-transport solution.
    let ab = if xs == ys && a == b {
        Potentials {
            f: aa.f.clone(),
            g: aa.g.clone(),
            ..aa
        }
    } else {
        solver.solve(&xs, &a, &ys, &b)
    };
    let dot = |w: &[T], u: &[T], v: &[T]| -> T { w.iter().zip(u).zip(v).map(|((&w, &u), &v)| w * (u - v)).sum() };
    let s = dot(&a, &ab.f, &aa.f) + dot(&b, &ab.g, &bb_.g);
    let value = if s > T::zero() {
        if cfg.p == 1 {
            s
        } else {
            s.sqrt()
        }
    } else {
        T::zero()
    };
    let dual_gap = ab.gap.max(aa.gap).max(bb_.gap);
    Ok(SinkhornResult {
        value,
        divergence: s,
        converged: ab.converged && aa.converged && bb_.converged,
        dual_gap,
        iterations: ab.iterations.max(aa.iterations).max(bb_.iterations),
        n_used,
        m_used,
    })
}

/// Points and normalized weights, subsampled with `rng` when above `cap`.
fn subsample<T: Scalar>(s: &SamplePoints<T>, cap: usize, rng: &mut ChaCha8Rng) -> (Vec<Point<T>>, Vec<T>) {
    let idx: Vec<usize> = if s.len() > cap {
        let mut v = index::sample(rng, s.len(), cap).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..s.len()).collect()
    };
    let pts = idx.iter().map(|&i| s.points()[i]).collect();
    let w: Vec<T> = idx.iter().map(|&i| s.weight(i)).collect();
    (pts, w)
}

/// Merges coincident points into one atom carrying their summed weight, and
/// drops zero-weight atoms. Weights are normalized to sum 1.
fn merge_duplicates<T: Scalar>(pts: &[Point<T>], w: &[T]) -> (Vec<Point<T>>, Vec<T>) {
    let mut slot: HashMap<(u64, u64), usize> = HashMap::with_capacity(pts.len());
    let mut out_p = Vec::new();
    let mut out_w: Vec<T> = Vec::new();
    for (p, &wi) in pts.iter().zip(w) {
        if wi == T::zero() {
            continue;
        }
        let norm = |v: T| if v == T::zero() { 0.0f64 } else { v.as_f64() };
        let key = (norm(p.x).to_bits(), norm(p.y).to_bits());
        match slot.get(&key) {
            Some(&k) => out_w[k] = out_w[k] + wi,
            None => {
                slot.insert(key, out_p.len());
                out_p.push(*p);
                out_w.push(wi);
            }
        }
    }
    let total: T = out_w.iter().copied().sum();
    for v in &mut out_w {
        *v = *v / total;
    }
    (out_p, out_w)
}

struct Potentials<T> {
    f: Vec<T>,
    g: Vec<T>,
    converged: bool,
    gap: T,
    iterations: usize,
}

struct Solver<T> {
    p: u32,
    /// Blur schedule in working units, ending at the target.
    blurs: Vec<T>,
    max_iters: usize,
    tol: T,
}

impl<T: Scalar> Solver<T> {
    fn new(cfg: &SinkhornConfig, scale: T) -> Self {
        let target = T::lit(cfg.blur);
        let mut blurs = Vec::new();
        let mut b = T::lit(cfg.initial_blur) * scale;
        while b > target {
            blurs.push(b);
            b = b * T::lit(0.5);
        }
        blurs.push(target);
        let p = cfg.p;
        let tol = T::lit(cfg.tol) * if p == 1 { scale } else { scale * scale };
        Solver {
            p,
            blurs,
            max_iters: cfg.max_iters,
            tol,
        }
    }

    fn cost(&self, u: Point<T>, v: Point<T>) -> T {
        if self.p == 1 {
            u.dist(v)
        } else {
            u.dist2(v)
        }
    }

    /// Entropic OT dual potentials by log-domain Sinkhorn with ε-annealing,
    /// finishing with one extrapolation step at the target ε.
    fn solve(&self, x: &[Point<T>], a: &[T], y: &[Point<T>], b: &[T]) -> Potentials<T> {
        let (n, m) = (x.len(), y.len());
        let dense = (n * m <= DENSE_COST_LIMIT).then(|| Dense::new(self, x, y));
        let log_a: Vec<T> = a.iter().map(|v| v.ln()).collect();
        let log_b: Vec<T> = b.iter().map(|v| v.ln()).collect();
        let mut f = vec![T::zero(); n];
        let mut g = vec![T::zero(); m];
        let mut iterations = 0;
        let mut gap = T::infinity();
        let mut converged = false;
        let last = self.blurs.len() - 1;
        for (stage, &blur) in self.blurs.iter().enumerate() {
            let eps = self.eps(blur);
            let cap = if stage == last { self.max_iters } else { STAGE_ITERS };
            let omega = if stage == last { T::lit(RELAXATION) } else { T::one() };
            for _ in 0..cap {
                let f_new = relax(
                    &f,
                    self.softmin_rows(x, y, &log_b, &g, eps, dense.as_ref(), false),
                    omega,
                );
                let g_new = relax(
                    &g,
                    self.softmin_rows(y, x, &log_a, &f_new, eps, dense.as_ref(), true),
                    omega,
                );
                gap = sup_diff(&f, &f_new).max(sup_diff(&g, &g_new));
                f = f_new;
                g = g_new;
                iterations += 1;
                if gap < self.tol {
                    converged |= stage == last;
                    break;
                }
            }
        }
        // Symmetric extrapolation from the last pair.
        let eps = self.eps(self.blurs[last]);
        let f_new = self.softmin_rows(x, y, &log_b, &g, eps, dense.as_ref(), false);
        let g_new = self.softmin_rows(y, x, &log_a, &f, eps, dense.as_ref(), true);
        Potentials {
            f: f_new,
            g: g_new,
            converged,
            gap,
            iterations,
        }
    }

    /// Self-transport potential by the averaged symmetric update
    /// `f ← ½(f + softmin(f))`, with the same annealing and final extrapolation.
    fn solve_self(&self, x: &[Point<T>], a: &[T]) -> Potentials<T> {
        let n = x.len();
        let dense = (n * n <= DENSE_COST_LIMIT).then(|| Dense::new(self, x, x));
        let log_a: Vec<T> = a.iter().map(|v| v.ln()).collect();
        let mut f = vec![T::zero(); n];
        let mut iterations = 0;
        let mut gap = T::infinity();
        let mut converged = false;
        let last = self.blurs.len() - 1;
        let half = T::lit(0.5);
        for (stage, &blur) in self.blurs.iter().enumerate() {
            let eps = self.eps(blur);
            let cap = if stage == last { self.max_iters } else { STAGE_ITERS };
            for _ in 0..cap {
                let t = self.softmin_rows(x, x, &log_a, &f, eps, dense.as_ref(), false);
                let f_new: Vec<T> = f.iter().zip(t).map(|(&o, n)| half * (o + n)).collect();
                gap = sup_diff(&f, &f_new);
                f = f_new;
                iterations += 1;
                if gap < self.tol {
                    converged |= stage == last;
                    break;
                }
            }
        }
        let eps = self.eps(self.blurs[last]);
        let f = self.softmin_rows(x, x, &log_a, &f, eps, dense.as_ref(), false);
        Potentials {
            g: f.clone(),
            f,
            converged,
            gap,
            iterations,
        }
    }

    fn eps(&self, blur: T) -> T {
        if self.p == 1 {
            blur
        } else {
            blur * blur
        }
    }

    /// `out_i = −ε·log Σ_j exp(log_w_j + (pot_j − C(u_i, v_j))/ε)`.
    #[allow(clippy::too_many_arguments)]
    fn softmin_rows(
        &self,
        u: &[Point<T>],
        v: &[Point<T>],
        log_w: &[T],
        pot: &[T],
        eps: T,
        dense: Option<&Dense<T>>,
        transposed: bool,
    ) -> Vec<T> {
        let inv_eps = T::one() / eps;
        u.par_iter()
            .enumerate()
            .map_init(
                || vec![T::zero(); v.len()],
                |z, (i, &ui)| {
                    let mut max = T::neg_infinity();
                    match dense {
                        Some(d) => {
                            let row = d.row(i, transposed);
                            for (((zj, &c), &lw), &pj) in z.iter_mut().zip(row).zip(log_w).zip(pot) {
                                *zj = lw + (pj - c) * inv_eps;
                                max = max.max(*zj);
                            }
                        }
                        None => {
                            for (j, &vj) in v.iter().enumerate() {
                                let zj = log_w[j] + (pot[j] - self.cost(ui, vj)) * inv_eps;
                                z[j] = zj;
                                max = max.max(zj);
                            }
                        }
                    }
                    let mut s = T::zero();
                    let floor = max - T::lit(SOFTMIN_CUTOFF);
                    for &zj in z.iter() {
                        if zj > floor {
                            s = s + (zj - max).exp();
                        }
                    }
                    -eps * (max + s.ln())
                },
            )
            .collect()
    }
}

struct Dense<T> {
    m: usize,
    /// Row-major n × m costs.
    c: Vec<T>,
    /// Row-major m × n costs.
    ct: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn new(solver: &Solver<T>, x: &[Point<T>], y: &[Point<T>]) -> Self {
        let (n, m) = (x.len(), y.len());
        let mut c = vec![T::zero(); n * m];
        c.par_chunks_mut(m.max(1)).enumerate().for_each(|(i, row)| {
            for j in 0..m {
                row[j] = solver.cost(x[i], y[j]);
            }
        });
        let mut ct = vec![T::zero(); n * m];
        ct.par_chunks_mut(n.max(1)).enumerate().for_each(|(j, row)| {
            for i in 0..n {
                row[i] = c[i * m + j];
            }
        });
        Dense { m, c, ct }
    }

    fn row(&self, i: usize, transposed: bool) -> &[T] {
        if transposed {
            let n = self.c.len() / self.m.max(1);
            &self.ct[i * n..(i + 1) * n]
        } else {
            &self.c[i * self.m..(i + 1) * self.m]
        }
    }
}

/// `(1 − ω)·old + ω·new`, elementwise.
fn relax<T: Scalar>(old: &[T], new: Vec<T>, omega: T) -> Vec<T> {
    if omega == T::one() {
        return new;
    }
    old.iter().zip(new).map(|(&o, n)| o + omega * (n - o)).collect()
}

fn sup_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&u, &v)| {
        let d = (u - v).abs();
        if d.is_nan() {
            T::infinity()
        } else {
            acc.max(d)
        }
    })
}
