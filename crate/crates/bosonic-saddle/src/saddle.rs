// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

//! Leading-order saddle-point approximation of the permanent.
//!
//! With `f_k = n_k / N`, `g_l = m_l / N` and saddles `p_kl = x_k U_kl y_l`,
//!
//! ```text
//! per(U[n|m]) ~ N! sqrt(prod f_k g_k) sum_s eps_s E_s / sqrt(det D'_s)
//! E_s = prod_k (f_k / x_k)^n_k (g_k / y_k)^m_k
//! ```
//!
//! where `D'` is any principal `(2M-1)`-minor of the Hessian `D`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::combinatorics::ln_factorial;
use crate::error::{Error, Result};
use crate::exact::{flop_estimate, permanent_repeated};
use crate::logcomplex::{LogComplex, LogSum};
use crate::network::{check_margins, NetworkMatrix, Occupation};
use crate::scaling::{default_starts, sinkhorn_scale_classical, solve_all_saddles, SaddleSolution, ScalingProblem};

/// Relative agreement required between the two Schur forms of `det D'`.
pub const FORM_TOL: f64 = 1e-10;
/// Default flag level for [`Diagnostics::coalescence_measure`].
pub const COALESCENCE_THRESHOLD: f64 = 1.5;
/// Sums this small relative to the sum of moduli are returned as exact zero.
pub const CANCEL_TOL: f64 = 1e-9;
const REAL_TOL: f64 = 1e-9;
const MAX_EXHAUSTIVE_SIGNS: usize = 12;

/// The Hessian `D = [[L1, p], [p^T, L2]]` at a saddle.
#[derive(Clone, Debug)]
pub struct HessianBlocks {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub p: DMatrix<Complex64>,
    /// Index in `0..2M` removed to form `D'`.
    pub crossed_index: usize,
}

impl HessianBlocks {
    pub fn new(p: DMatrix<Complex64>, f: Vec<f64>, g: Vec<f64>) -> Self {
        let crossed_index = 2 * f.len() - 1;
        HessianBlocks { lambda1: f, lambda2: g, p, crossed_index }
    }

    pub fn from_solution(sol: &SaddleSolution, n: &Occupation, m: &Occupation) -> Self {
        Self::new(sol.p.clone(), n.fractions(), m.fractions())
    }

    pub fn with_crossed(mut self, index: usize) -> Self {
        assert!(index < 2 * self.dim());
        self.crossed_index = index;
        self
    }

    pub fn dim(&self) -> usize {
        self.lambda1.len()
    }

    pub fn full_matrix(&self) -> DMatrix<Complex64> {
        let m = self.dim();
        DMatrix::from_fn(2 * m, 2 * m, |r, c| match (r < m, c < m) {
            (true, true) => diag(r, c, self.lambda1[r]),
            (false, false) => diag(r, c, self.lambda2[r - m]),
            (true, false) => self.p[(r, c - m)],
            (false, true) => self.p[(c, r - m)],
        })
    }

    /// Determinant of `D` with row and column `index` removed, by LU.
    pub fn principal_minor(&self, index: usize) -> Complex64 {
        let d = self.full_matrix().remove_row(index).remove_column(index);
        d.determinant()
    }

    /// `prod f_k det(G' - P'^T F^-1 P')` with column `l` of block two removed.
    fn form_columns(&self, l: usize) -> Complex64 {
        let m = self.dim();
        let keep: Vec<usize> = (0..m).filter(|&c| c != l).collect();
        let s = DMatrix::from_fn(m - 1, m - 1, |a, b| {
            let (a, b) = (keep[a], keep[b]);
            let q: Complex64 = (0..m).map(|k| self.p[(k, a)] * self.p[(k, b)] / self.lambda1[k]).sum();
            diag(a, b, self.lambda2[a]) - q
        });
        s.determinant() * self.lambda1.iter().product::<f64>()
    }

    /// `prod g_l det(F' - P' G^-1 P'^T)` with row `k` of block one removed.
    fn form_rows(&self, k: usize) -> Complex64 {
        let m = self.dim();
        let keep: Vec<usize> = (0..m).filter(|&r| r != k).collect();
        let s = DMatrix::from_fn(m - 1, m - 1, |a, b| {
            let (a, b) = (keep[a], keep[b]);
            let q: Complex64 = (0..m).map(|l| self.p[(a, l)] * self.p[(b, l)] / self.lambda2[l]).sum();
            diag(a, b, self.lambda1[a]) - q
        });
        s.determinant() * self.lambda2.iter().product::<f64>()
    }
}

fn diag(r: usize, c: usize, v: f64) -> Complex64 {
    if r == c {
        Complex64::new(v, 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// `det D'` through the Schur complement matching `crossed_index`, checked
/// against the complementary form.
pub fn det_dprime(blocks: &HessianBlocks) -> Result<Complex64> {
    let m = blocks.dim();
    let c = blocks.crossed_index;
    let (first, second) = if c >= m {
        (blocks.form_columns(c - m), blocks.form_rows(m - 1))
    } else {
        (blocks.form_rows(c), blocks.form_columns(m - 1))
    };
    // near-singular Hessians are compared on the natural scale of D'
    let dim = m as f64;
    let natural = (blocks.lambda1.iter().chain(&blocks.lambda2).map(|v| v.ln()).sum::<f64>() * (2.0 * dim - 1.0) / (2.0 * dim)).exp();
    let scale = first.norm().max(second.norm()).max(natural);
    if !first.is_finite() || !second.is_finite() || (first - second).norm() > FORM_TOL * scale {
        return Err(Error::FormMismatch { first, second });
    }
    Ok(first)
}

/// `E = prod_k (f_k / x_k)^n_k (g_k / y_k)^m_k` in the log domain.
///
/// Integer powers of `LogComplex` avoid any logarithm branch, so the result
/// does not depend on the gauge of `(x, y)`.
pub fn saddle_exponent(solution: &SaddleSolution, n: &Occupation, m: &Occupation) -> Result<LogComplex> {
    let f = n.fractions();
    let g = m.fractions();
    let mut acc = LogComplex::ONE;
    for k in 0..f.len() {
        if solution.x[k].norm() == 0.0 {
            return Err(Error::ZeroScalingComponent(k));
        }
        if solution.y[k].norm() == 0.0 {
            return Err(Error::ZeroScalingComponent(k));
        }
        acc = acc * LogComplex::from_complex(f[k] / solution.x[k]).powi(n.counts()[k] as i64);
        acc = acc * LogComplex::from_complex(g[k] / solution.y[k]).powi(m.counts()[k] as i64);
    }
    Ok(acc)
}

/// `ln |E / sqrt(det D')|`, the ordering key of a saddle.
pub fn log_abs_term(solution: &SaddleSolution, n: &Occupation, m: &Occupation) -> Option<f64> {
    let e = saddle_exponent(solution, n, m).ok()?;
    let det = det_dprime(&HessianBlocks::from_solution(solution, n, m)).ok()?;
    Some(e.log_mag() - 0.5 * det.norm().ln())
}

#[derive(Clone, Debug)]
pub struct SaddleContribution {
    pub solution: SaddleSolution,
    pub exponent_term: LogComplex,
    pub det_dprime: Complex64,
    /// `eps * exponent_term / sqrt(det_dprime)` on the principal branch.
    pub term: LogComplex,
    pub contributing: bool,
    /// `x_k y_l` real for all `k, l`.
    pub real_type: bool,
    /// `|p_kl| <= 1` for all `k, l`.
    pub in_domain: bool,
    pub sign_choice: i8,
}

impl SaddleContribution {
    pub fn new(solution: SaddleSolution, n: &Occupation, m: &Occupation) -> Result<Self> {
        let exponent_term = saddle_exponent(&solution, n, m)?;
        let det = det_dprime(&HessianBlocks::from_solution(&solution, n, m))?;
        let term = exponent_term / LogComplex::from_complex(det).sqrt();
        let (real_type, in_domain) = classify(&solution);
        Ok(SaddleContribution {
            solution,
            exponent_term,
            det_dprime: det,
            term,
            contributing: false,
            real_type,
            in_domain,
            sign_choice: 1,
        })
    }

    /// Recompute the term from its parts, including the sign.
    pub fn recomputed_term(&self) -> LogComplex {
        let t = self.exponent_term / LogComplex::from_complex(self.det_dprime).sqrt();
        if self.sign_choice < 0 {
            -t
        } else {
            t
        }
    }

    fn with_sign(&self, sign: i8) -> SaddleContribution {
        let mut c = self.clone();
        if sign != c.sign_choice {
            c.term = -c.term;
            c.sign_choice = sign;
        }
        c
    }
}

fn classify(sol: &SaddleSolution) -> (bool, bool) {
    let m = sol.x.len();
    let mut real_type = true;
    let mut in_domain = true;
    for k in 0..m {
        for l in 0..m {
            let t = sol.xy(k, l);
            let p = sol.p[(k, l)].norm();
            if p * (t.im / t.norm()).abs() > REAL_TOL {
                real_type = false;
            }
            if p > 1.0 + REAL_TOL {
                in_domain = false;
            }
        }
    }
    (real_type, in_domain)
}

/// Mark contributing saddles.
///
/// Complex-type saddles always contribute. Among real-type saddles with
/// `|p_kl| <= 1` only the one with the smallest `|term|` is kept.
pub fn select_contributing(solutions: &[SaddleSolution], n: &Occupation, m: &Occupation) -> Result<Vec<SaddleContribution>> {
    let mut out = solutions
        .iter()
        .map(|s| SaddleContribution::new(s.clone(), n, m))
        .collect::<Result<Vec<_>>>()?;
    let mut best_real: Option<usize> = None;
    for (i, c) in out.iter().enumerate() {
        if !c.real_type {
            continue;
        }
        if c.in_domain && best_real.is_none_or(|b| c.term.log_mag() < out[b].term.log_mag()) {
            best_real = Some(i);
        }
    }
    for (i, c) in out.iter_mut().enumerate() {
        c.contributing = !c.real_type || Some(i) == best_real;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    /// Total particle numbers used for the fit.
    pub points: Vec<usize>,
    /// One entry per contributing saddle, in output order.
    pub signs: Vec<i8>,
    pub calibrated: bool,
    /// Sum over points of `|approx - exact| / sum |term|`.
    pub objective: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub saddle_count: usize,
    pub contributing_count: usize,
    pub min_abs_det: f64,
    /// `N nu^3`, `nu` the geometric mean over all saddles of
    /// `|det D'_s| / (prod f g)^((2M-1)/2M)`.
    pub coalescence_measure: f64,
    pub coalescing: bool,
    /// Terms cancelled to below `CANCEL_TOL` and the result was set to zero.
    pub cancelled: bool,
    pub calibration: Calibration,
}

#[derive(Clone, Debug)]
pub struct Approximation {
    pub amplitude: LogComplex,
    pub permanent: LogComplex,
    /// Every distinct saddle found, contributing or not.
    pub contributions: Vec<SaddleContribution>,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug)]
pub struct ApproxOptions {
    pub seed: u64,
    /// Newton starts; `None` uses [`default_starts`].
    pub starts: Option<usize>,
    pub calibrate: bool,
    /// Largest total particle number used for sign calibration.
    pub calibration_max_n: usize,
    pub coalescence_threshold: f64,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions { seed: 0, starts: None, calibrate: true, calibration_max_n: 30, coalescence_threshold: COALESCENCE_THRESHOLD }
    }
}

pub fn amplitude_approx(u: &NetworkMatrix, n: &Occupation, m: &Occupation, seed: u64) -> Result<Approximation> {
    amplitude_approx_with(u, n, m, &ApproxOptions { seed, ..ApproxOptions::default() })
}

pub fn amplitude_approx_with(u: &NetworkMatrix, n: &Occupation, m: &Occupation, opts: &ApproxOptions) -> Result<Approximation> {
    let problem = ScalingProblem::new(u.clone(), n.clone(), m.clone())?;
    let starts = opts.starts.unwrap_or_else(|| default_starts(u.dim()));
    let solutions = solve_all_saddles(&problem, starts, opts.seed)?;
    let contributions = select_contributing(&solutions, n, m)?;
    let active: Vec<usize> = (0..contributions.len()).filter(|&i| contributions[i].contributing).collect();
    if active.is_empty() {
        return Err(Error::NoSaddlesFound);
    }
    let calibration = if opts.calibrate {
        calibrate(u, n, m, &active.iter().map(|&i| &contributions[i]).collect::<Vec<_>>(), opts.calibration_max_n)
    } else {
        Calibration { points: Vec::new(), signs: vec![1; active.len()], calibrated: false, objective: None }
    };
    assemble(n, m, contributions, active, calibration, opts.coalescence_threshold)
}

/// Sum signed terms and apply prefactors.
pub(crate) fn assemble(
    n: &Occupation,
    m: &Occupation,
    contributions: Vec<SaddleContribution>,
    active: Vec<usize>,
    calibration: Calibration,
    threshold: f64,
) -> Result<Approximation> {
    let mut contributions = contributions;
    for (j, &i) in active.iter().enumerate() {
        contributions[i] = contributions[i].with_sign(calibration.signs[j]);
    }
    let sum: LogSum = active.iter().map(|&i| contributions[i].term).collect();
    let mut total = sum.value();
    let cancelled = !total.is_zero() && total.log_mag() - sum.abs_total().log_mag() <= CANCEL_TOL.ln();
    if cancelled {
        total = LogComplex::ZERO;
    }
    let big_n = n.total();
    let f = n.fractions();
    let g = m.fractions();
    let ln_fg: f64 = f.iter().chain(&g).map(|v| v.ln()).sum();
    let permanent = total.scale_ln(ln_factorial(big_n as u64) + 0.5 * ln_fg);
    let amplitude = permanent.scale_ln(-0.5 * (n.ln_factorial_product() + m.ln_factorial_product()));

    let dim = f.len() as f64;
    let norm = ln_fg * (2.0 * dim - 1.0) / (2.0 * dim);
    let ln_nu = contributions.iter().map(|c| c.det_dprime.norm().ln() - norm).sum::<f64>() / contributions.len() as f64;
    let coalescence_measure = big_n as f64 * (3.0 * ln_nu).exp();
    let min_abs_det = contributions.iter().map(|c| c.det_dprime.norm()).fold(f64::INFINITY, f64::min);
    let coalescing = coalescence_measure < threshold;
    let approx = Approximation {
        amplitude,
        permanent,
        diagnostics: Diagnostics {
            saddle_count: contributions.len(),
            contributing_count: active.len(),
            min_abs_det,
            coalescence_measure,
            coalescing,
            cancelled,
            calibration,
        },
        contributions,
    };
    if coalescing {
        return Err(Error::CoalescingSaddles(Box::new(approx)));
    }
    Ok(approx)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Choose one sign per contributing saddle by matching the exact permanent at
/// small particle numbers with the same fractions.
///
/// The saddle matrices only depend on `n / N` and `m / N`, so the same
/// solutions serve every calibration point.
fn calibrate(u: &NetworkMatrix, n: &Occupation, m: &Occupation, active: &[&SaddleContribution], max_n: usize) -> Calibration {
    let s = active.len();
    let g = n.counts().iter().chain(m.counts()).fold(0, |a, &b| gcd(a, b));
    let n0 = Occupation::new_unchecked(n.counts().iter().map(|v| v / g).collect());
    let m0 = Occupation::new_unchecked(m.counts().iter().map(|v| v / g).collect());
    let base = n0.total();
    let mut scales: Vec<usize> = (1..).map_while(|j| (j * base <= max_n).then_some(j)).collect();
    if scales.is_empty() && flop_estimate(&n0, &m0).upper <= 100_000_000 {
        scales.push(1);
    }
    let uncalibrated = Calibration { points: Vec::new(), signs: vec![1; s], calibrated: false, objective: None };
    if scales.is_empty() {
        return uncalibrated;
    }
    let dets: Vec<LogComplex> = active.iter().map(|c| LogComplex::from_complex(c.det_dprime).sqrt()).collect();
    // per point: terms and exact value, normalised by the sum of |term|
    let mut samples: Vec<(Vec<Complex64>, Complex64)> = Vec::new();
    for &j in &scales {
        let nj = n0.scaled(j);
        let mj = m0.scaled(j);
        let big_n = nj.total();
        let pre = ln_factorial(big_n as u64)
            + 0.5 * nj.fractions().iter().chain(&mj.fractions()).map(|v| v.ln()).sum::<f64>();
        let mut terms = Vec::with_capacity(s);
        for (c, d) in active.iter().zip(&dets) {
            match saddle_exponent(&c.solution, &nj, &mj) {
                Ok(e) => terms.push((e / *d).scale_ln(pre)),
                Err(_) => return uncalibrated,
            }
        }
        let scale: LogSum = terms.iter().map(|t| LogComplex::from_ln(t.log_mag())).collect();
        let scale = scale.value();
        let exact = permanent_repeated(u.matrix(), nj.counts(), mj.counts()).value;
        samples.push((terms.iter().map(|t| (*t / scale).to_complex()).collect(), (exact / scale).to_complex()));
    }
    let objective = |signs: &[i8]| -> f64 {
        samples
            .iter()
            .map(|(terms, exact)| {
                let v: Complex64 = terms.iter().zip(signs).map(|(t, &e)| t * e as f64).sum();
                (v - exact).norm()
            })
            .sum()
    };
    let mut best = vec![1i8; s];
    let mut best_obj = objective(&best);
    if s <= MAX_EXHAUSTIVE_SIGNS {
        for mask in 1u32..(1 << s) {
            let signs: Vec<i8> = (0..s).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
            let obj = objective(&signs);
            if obj < best_obj * (1.0 - 1e-9) {
                best = signs;
                best_obj = obj;
            }
        }
    } else {
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..s {
                let mut trial = best.clone();
                trial[i] = -trial[i];
                let obj = objective(&trial);
                if obj < best_obj * (1.0 - 1e-9) {
                    best = trial;
                    best_obj = obj;
                    improved = true;
                }
            }
        }
    }
    Calibration { points: scales.iter().map(|j| j * base).collect(), signs: best, calibrated: true, objective: Some(best_obj) }
}

/// Classical probability `per(|U|^2[n|m]) / prod m_k!` from the unique
/// positive saddle.
pub fn classical_probability_approx(u: &NetworkMatrix, n: &Occupation, m: &Occupation) -> Result<f64> {
    let a = u.intensities();
    for k in 0..a.nrows() {
        for l in 0..a.ncols() {
            if !(a[(k, l)] > 0.0) {
                return Err(Error::NonPositiveIntensity(k, l));
            }
        }
    }
    Ok(classical_permanent_approx(&a, n, m)?.scale_ln(-m.ln_factorial_product()).to_complex().re)
}

/// Saddle-point value of `per(A[n|m])` for a positive matrix `A`.
pub fn classical_permanent_approx(a: &DMatrix<f64>, n: &Occupation, m: &Occupation) -> Result<LogComplex> {
    check_margins(n, m)?;
    let sol = sinkhorn_scale_classical(a, n, m, 1e-15)?;
    let e = saddle_exponent(&sol, n, m)?;
    let det = det_dprime(&HessianBlocks::from_solution(&sol, n, m))?;
    let ln_fg: f64 = n.fractions().iter().chain(&m.fractions()).map(|v| v.ln()).sum();
    Ok((e / LogComplex::from_complex(det).sqrt()).scale_ln(ln_factorial(n.total() as u64) + 0.5 * ln_fg))
}

/// `ln` of the entropy form `exp(N H) / sqrt((2 pi N)^(M-1) prod f_k)` of the
/// multinomial coefficient.
pub fn multinomial_approx(n: &Occupation) -> Result<f64> {
    if !n.strictly_positive() {
        return Err(Error::EmptyMode);
    }
    let big_n = n.total() as f64;
    let f = n.fractions();
    let entropy: f64 = -f.iter().map(|v| v * v.ln()).sum::<f64>();
    let dim = f.len() as f64;
    Ok(big_n * entropy - 0.5 * (dim - 1.0) * (2.0 * std::f64::consts::PI * big_n).ln() - 0.5 * f.iter().map(|v| v.ln()).sum::<f64>())
}

/// `ln(N! / prod n_k!)`.
pub fn multinomial_ln_exact(n: &Occupation) -> f64 {
    ln_factorial(n.total() as u64) - n.ln_factorial_product()
}

/// `theta_n` in `n! = sqrt(2 pi (n + theta_n)) (n / e)^n`.
pub fn mortici_theta(n: u64) -> f64 {
    let x = n as f64;
    let r = if n == 0 { 0.0 } else { ln_factorial(n) - x * x.ln() + x };
    (2.0 * r).exp() / (2.0 * std::f64::consts::PI) - x
}

/// Relative error of the entropy form for `C(N, k)`.
pub fn stirling_binomial_error(big_n: usize, k: usize) -> f64 {
    let occ = Occupation::new_unchecked(vec![k, big_n - k]);
    match multinomial_approx(&occ) {
        Ok(a) => (a - multinomial_ln_exact(&occ)).exp_m1().abs(),
        Err(_) => f64::NAN,
    }
}

/// Numerical checks of the determinant identities behind the Hessian
/// reduction.
pub mod identities {
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    /// Margin constraints on `p_kl` (index `k M + l`): all row sums and the
    /// first `M - 1` column sums.
    pub fn constraint_matrix(m: usize) -> DMatrix<Complex64> {
        let mut c = DMatrix::zeros(2 * m - 1, m * m);
        for k in 0..m {
            for l in 0..m {
                c[(k, k * m + l)] = Complex64::new(1.0, 0.0);
                if l < m - 1 {
                    c[(m + l, k * m + l)] = Complex64::new(1.0, 0.0);
                }
            }
        }
        c
    }

    /// Column set where [`constraint_matrix`] is nonsingular: `(k, M)` for
    /// all `k` and `(1, l)` for `l < M`.
    pub fn pivot_columns(m: usize) -> Vec<usize> {
        (0..m).map(|k| k * m + m - 1).chain(0..m - 1).collect()
    }

    /// Both sides of
    /// `det(C_I)^2 det(K^T A K) = det(A) det(C A^-1 C^T)`, where
    /// `K` stacks `B = -C_I^-1 C_II` over the identity.
    pub fn generalized_sylvester_sides(a: &DMatrix<Complex64>, c: &DMatrix<Complex64>, pivots: &[usize]) -> Option<(Complex64, Complex64)> {
        let n = a.nrows();
        let r = c.nrows();
        let rest: Vec<usize> = (0..n).filter(|i| !pivots.contains(i)).collect();
        let ci = c.select_columns(pivots);
        let cii = c.select_columns(&rest);
        let b = -ci.clone().lu().solve(&cii)?;
        let mut k = DMatrix::zeros(n, n - r);
        for (row, &i) in pivots.iter().enumerate() {
            for col in 0..n - r {
                k[(i, col)] = b[(row, col)];
            }
        }
        for (col, &i) in rest.iter().enumerate() {
            k[(i, col)] = Complex64::new(1.0, 0.0);
        }
        let dci = ci.determinant();
        let lhs = dci * dci * (k.transpose() * a * &k).determinant();
        let ainv = a.clone().try_inverse()?;
        let rhs = a.determinant() * (c * ainv * c.transpose()).determinant();
        Some((lhs, rhs))
    }

    /// `det [[A1, A2], [A3, A4]]` and its two Schur-complement forms.
    pub fn block_determinant_sides(
        a1: &DMatrix<Complex64>,
        a2: &DMatrix<Complex64>,
        a3: &DMatrix<Complex64>,
        a4: &DMatrix<Complex64>,
    ) -> Option<(Complex64, Complex64, Complex64)> {
        let (p, q) = (a1.nrows(), a4.nrows());
        let mut full = DMatrix::zeros(p + q, p + q);
        full.view_mut((0, 0), (p, p)).copy_from(a1);
        full.view_mut((0, p), (p, q)).copy_from(a2);
        full.view_mut((p, 0), (q, p)).copy_from(a3);
        full.view_mut((p, p), (q, q)).copy_from(a4);
        let i1 = a1.clone().try_inverse()?;
        let i4 = a4.clone().try_inverse()?;
        let first = a1.determinant() * (a4 - a3 * &i1 * a2).determinant();
        let second = a4.determinant() * (a1 - a2 * &i4 * a3).determinant();
        Some((full.determinant(), first, second))
    }
}

#[cfg(test)]
mod tests {
    use super::identities::*;
    use super::*;
    use crate::exact::amplitude_exact;
    use crate::logcomplex::relative_error;
    use crate::network::haar_random_unitary;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn occ(v: &[usize]) -> Occupation {
        Occupation::new(v.to_vec()).unwrap()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(r, c, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn bell_classical_det() {
        for (n, m) in [(vec![15, 15], vec![10, 20]), (vec![2, 3, 5], vec![4, 4, 2])] {
            let (n, m) = (occ(&n), occ(&m));
            let (f, g) = (n.fractions(), m.fractions());
            let p = DMatrix::from_fn(f.len(), f.len(), |k, l| Complex64::new(f[k] * g[l], 0.0));
            let blocks = HessianBlocks::new(p, f.clone(), g.clone());
            let want: f64 = f.iter().product::<f64>() * g.iter().product::<f64>();
            for idx in 0..2 * f.len() {
                let b = blocks.clone().with_crossed(idx);
                assert!(rel(det_dprime(&b).unwrap(), Complex64::new(want, 0.0)) < 1e-13);
                assert!(rel(b.principal_minor(idx), Complex64::new(want, 0.0)) < 1e-12);
            }
        }
    }

    #[test]
    fn form_mismatch_off_saddle() {
        let p = DMatrix::from_fn(2, 2, |k, l| Complex64::new(0.1 + k as f64 * 0.3, l as f64 * 0.2));
        let blocks = HessianBlocks::new(p, vec![0.5, 0.5], vec![0.3, 0.7]);
        assert!(matches!(det_dprime(&blocks), Err(Error::FormMismatch { .. })));
    }

    #[test]
    fn minors_agree_at_saddles() {
        let cases = [
            (NetworkMatrix::beam_splitter(), vec![10, 20], vec![12, 18]),
            (NetworkMatrix::tritter(), vec![4, 4, 4], vec![4, 4, 4]),
            (haar_random_unitary(3, 7).unwrap(), vec![2, 3, 4], vec![3, 3, 3]),
        ];
        for (u, n, m) in cases {
            let (n, m) = (occ(&n), occ(&m));
            let sols = solve_all_saddles(&ScalingProblem::new(u, n.clone(), m.clone()).unwrap(), 100, 2).unwrap();
            for s in &sols {
                let b = HessianBlocks::from_solution(s, &n, &m);
                let d = det_dprime(&b).unwrap();
                for idx in 0..2 * n.len() {
                    assert!(rel(b.principal_minor(idx), d) < 1e-12, "minor {idx}");
                }
            }
        }
    }

    #[test]
    fn exponent_gauge_invariant() {
        let (n, m) = (occ(&[10, 20]), occ(&[12, 18]));
        let sols = solve_all_saddles(&ScalingProblem::new(NetworkMatrix::beam_splitter(), n.clone(), m.clone()).unwrap(), 50, 1).unwrap();
        let s = &sols[0];
        let e0 = saddle_exponent(s, &n, &m).unwrap();
        for lambda in [Complex64::new(0.0, 1.0), Complex64::from_polar(3.0, 2.5), Complex64::new(-0.01, 0.0)] {
            let e1 = saddle_exponent(&s.apply_gauge(lambda), &n, &m).unwrap();
            assert!(relative_error(e1, e0) < 1e-12);
        }
    }

    #[test]
    fn balanced_exponent_magnitude() {
        // |x_k| = sqrt(n_k / N), |y_l| = sqrt(m_l / N) at n = m = (N/2, N/2)
        let n = occ(&[15, 15]);
        let sols = solve_all_saddles(&ScalingProblem::new(NetworkMatrix::beam_splitter(), n.clone(), n.clone()).unwrap(), 50, 1).unwrap();
        for s in &sols {
            let e = saddle_exponent(s, &n, &n).unwrap();
            assert!((e.log_mag() + 30.0 * 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_component_reported() {
        let n = occ(&[1, 1]);
        let mut s = SaddleSolution::from_xy(
            NetworkMatrix::beam_splitter().matrix(),
            vec![Complex64::new(1.0, 0.0); 2],
            vec![Complex64::new(1.0, 0.0); 2],
            &[0.5, 0.5],
            &[0.5, 0.5],
        );
        s.y[1] = Complex64::new(0.0, 0.0);
        assert!(matches!(saddle_exponent(&s, &n, &n), Err(Error::ZeroScalingComponent(1))));
    }

    #[test]
    fn hom_and_parity_zeros() {
        let bs = NetworkMatrix::beam_splitter();
        let a = amplitude_approx(&bs, &occ(&[1, 1]), &occ(&[1, 1]), 0).unwrap();
        assert!(a.amplitude.is_zero());
        for m1 in [3, 7, 11] {
            let a = amplitude_approx(&bs, &occ(&[10, 10]), &occ(&[m1, 20 - m1]), 0).unwrap();
            assert!(a.amplitude.is_zero() && a.diagnostics.cancelled, "m1 = {m1}");
        }
    }

    #[test]
    fn balanced_beam_splitter_accuracy() {
        let bs = NetworkMatrix::beam_splitter();
        let (n, m) = (occ(&[15, 15]), occ(&[12, 18]));
        let a = amplitude_approx(&bs, &n, &m, 0).unwrap();
        let e = amplitude_exact(&bs, &n, &m).unwrap();
        let err = relative_error(a.amplitude, e);
        assert!(err < 2.0 * stirling_binomial_error(30, 12), "{err}");
        assert_eq!(a.diagnostics.contributing_count, 2);
        for c in &a.contributions {
            assert!(relative_error(c.recomputed_term(), c.term) < 1e-12);
        }
    }

    #[test]
    fn decay_regime_single_saddle() {
        let bs = NetworkMatrix::beam_splitter();
        let (n, m) = (occ(&[10, 50]), occ(&[2, 58]));
        let a = amplitude_approx(&bs, &n, &m, 0).unwrap();
        assert_eq!(a.diagnostics.saddle_count, 2);
        assert_eq!(a.diagnostics.contributing_count, 1);
        assert!(relative_error(a.amplitude, amplitude_exact(&bs, &n, &m).unwrap()) < 0.05);
    }

    #[test]
    fn coalescence_flagged() {
        let bs = NetworkMatrix::beam_splitter();
        let r = amplitude_approx(&bs, &occ(&[10, 50]), &occ(&[8, 52]), 0);
        match r {
            Err(Error::CoalescingSaddles(a)) => assert!(a.diagnostics.coalescing),
            other => panic!("expected coalescing flag, got {other:?}"),
        }
    }

    #[test]
    fn inversion_symmetry() {
        let u = haar_random_unitary(3, 4).unwrap();
        let (n, m) = (occ(&[3, 4, 5]), occ(&[6, 2, 4]));
        let a = amplitude_approx(&u, &n, &m, 1).unwrap();
        let b = amplitude_approx(&u.adjoint(), &m, &n, 1).unwrap();
        assert!(relative_error(a.amplitude, b.amplitude.conj()) < 1e-9);
    }

    #[test]
    fn classical_bell_exact() {
        let bell2 = NetworkMatrix::beam_splitter();
        let p = classical_probability_approx(&bell2, &occ(&[15, 15]), &occ(&[10, 20])).unwrap();
        let want = (ln_factorial(30) - 30.0 * 2f64.ln() - ln_factorial(10) - ln_factorial(20)).exp();
        assert!((p - want).abs() / want < 1e-12);
        let p3 = classical_probability_approx(&NetworkMatrix::tritter(), &occ(&[10, 10, 10]), &occ(&[10, 10, 10])).unwrap();
        let want3 = (ln_factorial(30) - 30.0 * 3f64.ln() - 3.0 * ln_factorial(10)).exp();
        assert!((p3 - want3).abs() / want3 < 1e-12);
    }

    #[test]
    fn classical_non_bell() {
        let u = haar_random_unitary(2, 3).unwrap();
        let (n, m) = (occ(&[5, 3]), occ(&[4, 4]));
        let approx = classical_probability_approx(&u, &n, &m).unwrap();
        let exact = crate::exact::classical_probability(&u, &n, &m).unwrap();
        assert!((approx - exact).abs() / exact < 0.05, "{approx} {exact}");
    }

    #[test]
    fn classical_zero_intensity() {
        let id = NetworkMatrix::identity(2).unwrap();
        assert!(matches!(classical_probability_approx(&id, &occ(&[1, 1]), &occ(&[1, 1])), Err(Error::NonPositiveIntensity(0, 1))));
    }

    #[test]
    fn multinomial_values() {
        let n = occ(&[15, 15]);
        assert!((multinomial_ln_exact(&n) - 155117520f64.ln()).abs() < 1e-12);
        let err = (multinomial_approx(&n).unwrap() - multinomial_ln_exact(&n)).exp_m1().abs();
        assert!(err < 0.02);
        assert_eq!(multinomial_approx(&occ(&[7])).unwrap(), 0.0);
        assert!(matches!(multinomial_approx(&Occupation::new_unchecked(vec![3, 0])), Err(Error::EmptyMode)));
    }

    #[test]
    fn multinomial_error_decays_like_inverse_n() {
        let ns: Vec<usize> = (10..=200).step_by(10).collect();
        let errs: Vec<f64> = ns.iter().map(|&n| stirling_binomial_error(n, n / 2)).collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0]);
        }
        for (&n, &e) in ns.iter().zip(&errs) {
            assert!((e * n as f64 - 0.25).abs() < 0.02, "N = {n}: {}", e * n as f64);
        }
    }

    #[test]
    fn mortici_bounds() {
        for n in [1u64, 5, 20, 100] {
            let t = mortici_theta(n);
            assert!(t > 1.0 / 6.0 - 0.01 && t < 1.0 / 6.0 + 0.05, "{n}: {t}");
        }
    }

    #[test]
    fn sylvester_identity_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for trial in 0..50 {
            let m = 2 + trial % 3;
            let a = random_matrix(&mut rng, m * m, m * m);
            let (lhs, rhs) = generalized_sylvester_sides(&a, &constraint_matrix(m), &pivot_columns(m)).unwrap();
            assert!(rel(lhs, rhs) < 1e-9, "trial {trial}");
        }
    }

    #[test]
    fn block_identity_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..50 {
            let (p, q) = (1 + trial % 3, 1 + (trial / 3) % 3);
            let a1 = random_matrix(&mut rng, p, p);
            let a2 = random_matrix(&mut rng, p, q);
            let a3 = random_matrix(&mut rng, q, p);
            let a4 = random_matrix(&mut rng, q, q);
            let (full, x, y) = block_determinant_sides(&a1, &a2, &a3, &a4).unwrap();
            assert!(rel(x, full) < 1e-9 && rel(y, full) < 1e-9, "trial {trial}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn crossed_index_invariance(seed in 0u64..500, n1 in 1usize..5, n2 in 1usize..5, m1 in 1usize..5) {
            let total = n1 + n2 + 2;
            prop_assume!(m1 + 1 < total);
            let (n, m) = (occ(&[n1, n2, 2]), occ(&[m1, 1, total - m1 - 1]));
            let u = haar_random_unitary(3, seed).unwrap();
            if let Ok(sols) = solve_all_saddles(&ScalingProblem::new(u, n.clone(), m.clone()).unwrap(), 40, seed) {
                for s in &sols {
                    let b = HessianBlocks::from_solution(s, &n, &m);
                    let d = det_dprime(&b).unwrap();
                    for idx in 0..6 {
                        prop_assert!(rel(det_dprime(&b.clone().with_crossed(idx)).unwrap(), d) < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn classical_bell_any_margins(a in 1usize..60, b in 1usize..60, c in 1usize..60) {
            let total = a + b + c;
            let n = occ(&[a, b, c]);
            let m = occ(&[c, a, b]);
            let p = classical_probability_approx(&NetworkMatrix::fourier(3).unwrap(), &n, &m).unwrap();
            let want = (ln_factorial(total as u64) - total as f64 * 3f64.ln() - m.ln_factorial_product()).exp();
            prop_assert!((p - want).abs() / want < 1e-12);
        }
    }
}
