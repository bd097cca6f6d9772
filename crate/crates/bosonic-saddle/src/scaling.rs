// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

//! Complex matrix scaling: find diagonal `x`, `y` with `x_k U_kl y_l`
//! having row sums `n_k / N` and column sums `m_l / N`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{check_margins, NetworkMatrix, Occupation};

/// Margin residual accepted as a root.
pub const SOLVER_TOL: f64 = 1e-12;
/// Two saddles are the same when their `p` matrices agree to this.
pub const DEDUP_TOL: f64 = 1e-8;
/// Saddles with some `|p_kl|` at or below this are rejected.
pub const DEGENERATE_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 100;
const START_SPREAD: f64 = 1.5;

pub fn default_starts(m: usize) -> usize {
    if m <= 3 {
        200
    } else {
        1000
    }
}

#[derive(Clone, Debug)]
pub struct ScalingProblem {
    pub u: NetworkMatrix,
    pub n: Occupation,
    pub m: Occupation,
}

impl ScalingProblem {
    pub fn new(u: NetworkMatrix, n: Occupation, m: Occupation) -> Result<Self> {
        if n.len() != u.dim() || m.len() != u.dim() {
            return Err(Error::BadDimension(format!("occupations must have {} modes", u.dim())));
        }
        check_margins(&n, &m)?;
        if !n.strictly_positive() || !m.strictly_positive() {
            return Err(Error::EmptyMode);
        }
        Ok(ScalingProblem { u, n, m })
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    pub fn total(&self) -> usize {
        self.n.total()
    }
}

/// A root of the scaling problem, `p_kl = x_k U_kl y_l`.
#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub p: DMatrix<Complex64>,
    /// Max-norm violation of the row and column margins.
    pub residual: f64,
    /// Gauge factor `lambda` applied as `x -> lambda x`, `y -> y / lambda`.
    pub gauge: Complex64,
}

impl SaddleSolution {
    pub fn from_xy(u: &DMatrix<Complex64>, x: Vec<Complex64>, y: Vec<Complex64>, f: &[f64], g: &[f64]) -> Self {
        let p = DMatrix::from_fn(x.len(), y.len(), |k, l| x[k] * u[(k, l)] * y[l]);
        let residual = margin_residual(&p, f, g);
        SaddleSolution { x, y, p, residual, gauge: Complex64::new(1.0, 0.0) }
    }

    /// `x_k y_l`, the gauge-invariant part of `p_kl / U_kl`.
    pub fn xy(&self, k: usize, l: usize) -> Complex64 {
        self.x[k] * self.y[l]
    }

    pub fn min_abs_p(&self) -> f64 {
        self.p.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn apply_gauge(&self, lambda: Complex64) -> SaddleSolution {
        SaddleSolution {
            x: self.x.iter().map(|v| v * lambda).collect(),
            y: self.y.iter().map(|v| v / lambda).collect(),
            p: self.p.clone(),
            residual: self.residual,
            gauge: self.gauge * lambda,
        }
    }

    /// Rotate so that `x_1` is real and positive.
    pub fn canonical(&self) -> SaddleSolution {
        let x1 = self.x[0];
        if x1.norm() == 0.0 {
            return self.clone();
        }
        self.apply_gauge(x1.conj() / x1.norm())
    }

    /// Largest entrywise difference of the saddle matrices.
    pub fn p_distance(&self, other: &SaddleSolution) -> f64 {
        self.p.iter().zip(other.p.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

pub fn margin_residual(p: &DMatrix<Complex64>, f: &[f64], g: &[f64]) -> f64 {
    let mut r: f64 = 0.0;
    for k in 0..p.nrows() {
        let s: Complex64 = p.row(k).iter().sum();
        r = r.max((s - f[k]).norm());
    }
    for l in 0..p.ncols() {
        let s: Complex64 = p.column(l).iter().sum();
        r = r.max((s - g[l]).norm());
    }
    r
}

/// The `M - 1` equations in `R_1..R_{M-1}` (with `R_M = 1`) left after
/// eliminating `y`.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    /// `z[l][k] = sqrt(n_k / N) U_kl` for `l < M - 1`.
    pub z: Vec<Vec<Complex64>>,
    /// `m_l / N` for `l < M - 1`.
    pub targets: Vec<f64>,
    sqrt_f: Vec<f64>,
}

pub fn build_reduced_system(problem: &ScalingProblem) -> ReducedSystem {
    let m = problem.dim();
    let sqrt_f: Vec<f64> = problem.n.fractions().iter().map(|v| v.sqrt()).collect();
    let z = (0..m - 1).map(|l| (0..m).map(|k| sqrt_f[k] * problem.u.get(k, l)).collect()).collect();
    let targets = problem.m.fractions()[..m - 1].to_vec();
    ReducedSystem { z, targets, sqrt_f }
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.sqrt_f.len()
    }

    fn full(&self, r: &[Complex64]) -> Vec<Complex64> {
        let mut v = r.to_vec();
        v.push(Complex64::new(1.0, 0.0));
        v
    }

    /// `F_l(R) = (sum_k R_k Z_k)(sum_q conj(Z_q) / R_q) - m_l / N`.
    pub fn residual(&self, r: &[Complex64]) -> Vec<Complex64> {
        let rr = self.full(r);
        self.z
            .iter()
            .zip(&self.targets)
            .map(|(z, t)| {
                let a: Complex64 = z.iter().zip(&rr).map(|(zk, rk)| zk * rk).sum();
                let b: Complex64 = z.iter().zip(&rr).map(|(zk, rk)| zk.conj() / rk).sum();
                a * b - t
            })
            .collect()
    }

    /// `dF_l / dR_j = Z_j B_l - A_l conj(Z_j) / R_j^2`.
    pub fn jacobian(&self, r: &[Complex64]) -> DMatrix<Complex64> {
        let rr = self.full(r);
        let n = r.len();
        let mut j = DMatrix::zeros(n, n);
        for (l, z) in self.z.iter().enumerate() {
            let a: Complex64 = z.iter().zip(&rr).map(|(zk, rk)| zk * rk).sum();
            let b: Complex64 = z.iter().zip(&rr).map(|(zk, rk)| zk.conj() / rk).sum();
            for c in 0..n {
                j[(l, c)] = z[c] * b - a * z[c].conj() / (rr[c] * rr[c]);
            }
        }
        j
    }

    /// `x_k = R_k sqrt(n_k / N)`, `y_l = sum_k conj(U_kl) n_k / (N x_k)`.
    pub fn recover(&self, u: &DMatrix<Complex64>, r: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let rr = self.full(r);
        let m = self.dim();
        let x: Vec<Complex64> = rr.iter().zip(&self.sqrt_f).map(|(rk, s)| rk * s).collect();
        let y = (0..m)
            .map(|l| (0..m).map(|k| u[(k, l)].conj() * self.sqrt_f[k] * self.sqrt_f[k] / x[k]).sum())
            .collect();
        (x, y)
    }
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Solve the complex system `J d = -F` in its real `2n x 2n` form.
fn real_newton_step(j: &DMatrix<Complex64>, f: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = f.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut b = DVector::<f64>::zeros(2 * n);
    for r in 0..n {
        for c in 0..n {
            let z = j[(r, c)];
            a[(r, c)] = z.re;
            a[(r, c + n)] = -z.im;
            a[(r + n, c)] = z.im;
            a[(r + n, c + n)] = z.re;
        }
        b[r] = -f[r].re;
        b[r + n] = -f[r].im;
    }
    let d = a.lu().solve(&b)?;
    if d.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((0..n).map(|i| Complex64::new(d[i], d[i + n])).collect())
}

/// Damped Newton with backtracking on `|F|^2`.
fn newton(sys: &ReducedSystem, mut r: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let mut f = sys.residual(&r);
    for _ in 0..MAX_NEWTON {
        if max_norm(&f) <= 1e-15 {
            break;
        }
        let d = real_newton_step(&sys.jacobian(&r), &f)?;
        let f2 = norm2(&f);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<Complex64> = r.iter().zip(&d).map(|(a, b)| a + b * t).collect();
            if trial.iter().all(|z| z.norm() > 1e-150 && z.norm() < 1e150 && z.re.is_finite() && z.im.is_finite()) {
                let ft = sys.residual(&trial);
                let ft2 = norm2(&ft);
                if ft2.is_finite() && ft2 <= (1.0 - 1e-4 * t) * f2 {
                    r = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if max_norm(&f) <= SOLVER_TOL {
        Some(r)
    } else {
        None
    }
}

/// Newton on the full bilinear system with `x_1` held fixed.
fn polish(u: &DMatrix<Complex64>, sol: SaddleSolution, f: &[f64], g: &[f64]) -> SaddleSolution {
    let m = f.len();
    let dim = 2 * m - 1;
    let mut best = sol;
    for _ in 0..4 {
        let (x, y) = (&best.x, &best.y);
        let uy: Vec<Complex64> = (0..m).map(|k| (0..m).map(|l| u[(k, l)] * y[l]).sum()).collect();
        let xu: Vec<Complex64> = (0..m).map(|l| (0..m).map(|k| x[k] * u[(k, l)]).sum()).collect();
        let mut j = DMatrix::<Complex64>::zeros(dim, dim);
        let mut rhs = DVector::<Complex64>::zeros(dim);
        // unknowns: x_2..x_M at 0..m-1, y_1..y_M at m-1..2m-1
        for k in 0..m {
            rhs[k] = -(x[k] * uy[k] - f[k]);
            if k > 0 {
                j[(k, k - 1)] = uy[k];
            }
            for l in 0..m {
                j[(k, m - 1 + l)] = x[k] * u[(k, l)];
            }
        }
        for l in 0..m - 1 {
            let row = m + l;
            rhs[row] = -(y[l] * xu[l] - g[l]);
            for k in 1..m {
                j[(row, k - 1)] = y[l] * u[(k, l)];
            }
            j[(row, m - 1 + l)] = xu[l];
        }
        let Some(d) = j.lu().solve(&rhs) else { break };
        let mut nx = x.clone();
        let mut ny = y.clone();
        for k in 1..m {
            nx[k] += d[k - 1];
        }
        for l in 0..m {
            ny[l] += d[m - 1 + l];
        }
        let cand = SaddleSolution::from_xy(u, nx, ny, f, g);
        if cand.residual.is_finite() && cand.residual < best.residual {
            best = cand;
        } else {
            break;
        }
    }
    best
}

fn start_point(m: usize, seed: u64, index: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let theta: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
    let spread = index % 2 == 1;
    (0..m - 1)
        .map(|k| {
            let mag = if spread {
                let g: f64 = rng.sample(StandardNormal);
                (START_SPREAD * g).exp()
            } else {
                1.0
            };
            Complex64::from_polar(mag, theta[k] - theta[m - 1])
        })
        .collect()
}

/// Multi-start Newton on the reduced system.
///
/// Half of the starts sit on the unit torus `|R_k| = 1`; the other half get
/// log-normal moduli so that real roots with `|R_k|` far from 1 are reached.
/// Converged roots are recovered to `(x, y, p)`, polished on the full
/// system, gauge-fixed, deduplicated and sorted by decreasing `|term|`.
pub fn solve_all_saddles(problem: &ScalingProblem, starts: usize, seed: u64) -> Result<Vec<SaddleSolution>> {
    let sys = build_reduced_system(problem);
    let u = problem.u.matrix();
    let f = problem.n.fractions();
    let g = problem.m.fractions();
    let m = problem.dim();
    let found: Vec<Option<SaddleSolution>> = (0..starts.max(1))
        .into_par_iter()
        .map(|i| {
            let r = newton(&sys, start_point(m, seed, i))?;
            let (x, y) = sys.recover(u, &r);
            let sol = polish(u, SaddleSolution::from_xy(u, x, y, &f, &g), &f, &g);
            (sol.residual <= SOLVER_TOL).then_some(sol)
        })
        .collect();
    let roots: Vec<SaddleSolution> = found.into_iter().flatten().collect();
    if roots.is_empty() {
        return Err(Error::NoConvergence);
    }
    let mut min_p = f64::INFINITY;
    let good: Vec<SaddleSolution> = roots
        .into_iter()
        .filter(|s| {
            let mp = s.min_abs_p();
            min_p = min_p.min(mp);
            mp > DEGENERATE_TOL
        })
        .collect();
    if good.is_empty() {
        return Err(Error::DegenerateSaddle { min_abs_p: min_p });
    }
    let mut sols = canonicalize_and_dedup(good);
    let keys: Vec<f64> = sols
        .iter()
        .map(|s| crate::saddle::log_abs_term(s, &problem.n, &problem.m).unwrap_or(f64::NEG_INFINITY))
        .collect();
    let mut order: Vec<usize> = (0..sols.len()).collect();
    order.sort_by(|&a, &b| {
        keys[b].partial_cmp(&keys[a]).unwrap_or(Ordering::Equal).then_with(|| cmp_p(&sols[a], &sols[b]))
    });
    let mut sorted = Vec::with_capacity(sols.len());
    for i in order {
        sorted.push(std::mem::replace(&mut sols[i], placeholder()));
    }
    Ok(sorted)
}

fn placeholder() -> SaddleSolution {
    SaddleSolution {
        x: Vec::new(),
        y: Vec::new(),
        p: DMatrix::zeros(0, 0),
        residual: 0.0,
        gauge: Complex64::new(1.0, 0.0),
    }
}

fn cmp_p(a: &SaddleSolution, b: &SaddleSolution) -> Ordering {
    for (x, y) in a.p.iter().zip(b.p.iter()) {
        for (u, v) in [(x.re, y.re), (x.im, y.im)] {
            if (u - v).abs() > DEDUP_TOL {
                return u.partial_cmp(&v).unwrap_or(Ordering::Equal);
            }
        }
    }
    Ordering::Equal
}

/// Fix the gauge (`x_1 > 0`) and keep one representative per distinct `p`.
pub fn canonicalize_and_dedup(solutions: Vec<SaddleSolution>) -> Vec<SaddleSolution> {
    let mut out: Vec<SaddleSolution> = Vec::new();
    for s in solutions {
        let c = s.canonical();
        if !out.iter().any(|o| o.p_distance(&c) <= DEDUP_TOL) {
            out.push(c);
        }
    }
    out
}

/// Sinkhorn iterate plus the L1 row-margin error after each sweep.
#[derive(Clone, Debug)]
pub struct SinkhornRun {
    pub solution: SaddleSolution,
    pub history: Vec<f64>,
    pub sweeps: usize,
}

/// Alternate row and column normalisation of a positive matrix.
///
/// The result uses the balanced gauge `sum x = sum y`.
pub fn sinkhorn_scale_classical(a: &DMatrix<f64>, n: &Occupation, m: &Occupation, tol: f64) -> Result<SaddleSolution> {
    sinkhorn_run(a, n, m, tol, 100_000).map(|r| r.solution)
}

pub fn sinkhorn_run(a: &DMatrix<f64>, n: &Occupation, m: &Occupation, tol: f64, max_sweeps: usize) -> Result<SinkhornRun> {
    let dim = a.nrows();
    if a.ncols() != dim || n.len() != dim || m.len() != dim {
        return Err(Error::BadDimension("matrix and occupations disagree".into()));
    }
    check_margins(n, m)?;
    if !n.strictly_positive() || !m.strictly_positive() {
        return Err(Error::EmptyMode);
    }
    for k in 0..dim {
        for l in 0..dim {
            if !(a[(k, l)] > 0.0) {
                return Err(Error::NonPositiveMatrix(k, l));
            }
        }
    }
    let f = n.fractions();
    let g = m.fractions();
    let mut x = vec![1.0; dim];
    let mut y = vec![1.0; dim];
    let mut history = Vec::new();
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        for k in 0..dim {
            x[k] = f[k] / (0..dim).map(|l| a[(k, l)] * y[l]).sum::<f64>();
        }
        for l in 0..dim {
            y[l] = g[l] / (0..dim).map(|k| x[k] * a[(k, l)]).sum::<f64>();
        }
        let rows: Vec<f64> = (0..dim).map(|k| x[k] * (0..dim).map(|l| a[(k, l)] * y[l]).sum::<f64>() - f[k]).collect();
        let l1: f64 = rows.iter().map(|v| v.abs()).sum();
        let stalled = history.last().is_some_and(|&h: &f64| l1 >= h) && l1 <= 1e3 * f64::EPSILON;
        history.push(l1);
        if rows.iter().all(|v| v.abs() <= tol) || stalled {
            break;
        }
    }
    let c = (y.iter().sum::<f64>() / x.iter().sum::<f64>()).sqrt();
    let xc: Vec<Complex64> = x.iter().map(|v| Complex64::new(v * c, 0.0)).collect();
    let yc: Vec<Complex64> = y.iter().map(|v| Complex64::new(v / c, 0.0)).collect();
    let ac = a.map(|v| Complex64::new(v, 0.0));
    let solution = SaddleSolution::from_xy(&ac, xc, yc, &f, &g);
    Ok(SinkhornRun { solution, history, sweeps })
}
