// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

//! Exact amplitudes: naive and repeated-row Ryser permanents, the
//! contingency-table expansion and classical-particle probabilities.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Float, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::combinatorics::{binomial_row, ln_factorial};
use crate::error::{Error, Result};
use crate::logcomplex::{frexp, LogComplex, LogSum};
use crate::network::{check_margins, enumerate_contingency_tables, ContingencyTable, NetworkMatrix, Occupation};

/// Largest matrix accepted by [`permanent_naive`].
pub const NAIVE_MAX: usize = 10;
/// Largest particle number accepted by [`amplitude_via_contingency_average`].
pub const CONTINGENCY_MAX: usize = 8;

/// `U[n|m]`: row `k` of `U` repeated `n_k` times, column `l` repeated `m_l` times.
#[derive(Clone, Debug)]
pub struct RepeatedMatrixSpec {
    pub base: NetworkMatrix,
    pub row_reps: Occupation,
    pub col_reps: Occupation,
}

impl RepeatedMatrixSpec {
    pub fn new(base: NetworkMatrix, row_reps: Occupation, col_reps: Occupation) -> Result<Self> {
        check_dims(base.dim(), &row_reps, &col_reps)?;
        Ok(RepeatedMatrixSpec { base, row_reps, col_reps })
    }

    pub fn total(&self) -> usize {
        self.row_reps.total()
    }

    /// The explicit `N x N` matrix.
    pub fn materialize(&self) -> DMatrix<Complex64> {
        materialize(self.base.matrix(), self.row_reps.counts(), self.col_reps.counts())
    }
}

fn check_dims(dim: usize, n: &Occupation, m: &Occupation) -> Result<()> {
    if n.len() != dim || m.len() != dim {
        return Err(Error::BadDimension(format!(
            "occupations have {} and {} modes, network has {dim}",
            n.len(),
            m.len()
        )));
    }
    check_margins(n, m)
}

pub fn materialize(a: &DMatrix<Complex64>, n: &[usize], m: &[usize]) -> DMatrix<Complex64> {
    let rows: Vec<usize> = n.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat(k).take(c)).collect();
    let cols: Vec<usize> = m.iter().enumerate().flat_map(|(l, &c)| std::iter::repeat(l).take(c)).collect();
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

#[derive(Clone, Copy, Default)]
struct CompensatedComplex {
    re: (f64, f64),
    im: (f64, f64),
}

fn neumaier(acc: &mut (f64, f64), x: f64) {
    let t = acc.0 + x;
    if acc.0.abs() >= x.abs() {
        acc.1 += (acc.0 - t) + x;
    } else {
        acc.1 += (x - t) + acc.0;
    }
    acc.0 = t;
}

impl CompensatedComplex {
    fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, z.re);
        neumaier(&mut self.im, z.im);
    }

    fn total(&self) -> Complex64 {
        Complex64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

/// Permanent by enumerating all `n!` permutations.
pub fn permanent_naive(a: &DMatrix<Complex64>) -> Result<LogComplex> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::BadDimension(format!("matrix is {}x{}, not square", n, a.ncols())));
    }
    if n > NAIVE_MAX {
        return Err(Error::TooLarge(format!("naive permanent limited to n <= {NAIVE_MAX}, got {n}")));
    }
    fn rec(a: &DMatrix<Complex64>, row: usize, used: u32, partial: Complex64, acc: &mut CompensatedComplex) {
        let n = a.nrows();
        if row == n {
            acc.add(partial);
            return;
        }
        for col in 0..n {
            if used & (1 << col) == 0 {
                rec(a, row + 1, used | (1 << col), partial * a[(row, col)], acc);
            }
        }
    }
    let mut acc = CompensatedComplex::default();
    rec(a, 0, 0, Complex64::new(1.0, 0.0), &mut acc);
    Ok(LogComplex::from_complex(acc.total()))
}

/// Output of the repeated-row Ryser evaluation.
#[derive(Clone, Debug, Serialize)]
pub struct RyserReport {
    pub value: LogComplex,
    /// Number of inclusion-exclusion terms, `prod_l (m_l + 1) - 1`.
    pub terms: u64,
    /// `sum over terms of N * (number of columns still present)`.
    pub flops: u64,
    /// Fixed-point fraction bits used by the final pass.
    pub precision_bits: u64,
    /// Whether the rounding bound certifies `value` to about 1e-15 relative.
    pub certified: bool,
}

/// Complex fixed-point number `(re + i im) / 2^P`.
#[derive(Clone, Debug)]
struct Fx {
    re: BigInt,
    im: BigInt,
}

impl Fx {
    fn zero() -> Fx {
        Fx { re: BigInt::zero(), im: BigInt::zero() }
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn add_assign(&mut self, o: &Fx) {
        self.re += &o.re;
        self.im += &o.im;
    }

    fn sub_assign(&mut self, o: &Fx) {
        self.re -= &o.re;
        self.im -= &o.im;
    }

    fn scaled(&self, k: usize) -> Fx {
        Fx { re: &self.re * k, im: &self.im * k }
    }

    /// `(self * o) >> p`, three real products.
    fn mul_shift(&self, o: &Fx, p: usize) -> Fx {
        let k1 = &o.re * (&self.re + &self.im);
        let k2 = &self.re * (&o.im - &o.re);
        let k3 = &self.im * (&o.re + &o.im);
        Fx { re: (&k1 - k3) >> p, im: (k1 + k2) >> p }
    }

    fn mul_int(&self, b: &BigInt) -> Fx {
        Fx { re: &self.re * b, im: &self.im * b }
    }

    fn max_bits(&self) -> u64 {
        self.re.bits().max(self.im.bits())
    }

    /// Value times `2^exp2`.
    fn to_log(&self, exp2: i64) -> LogComplex {
        if self.is_zero() {
            return LogComplex::ZERO;
        }
        let shift = self.max_bits().saturating_sub(62);
        let re = (&self.re >> shift).to_f64().unwrap_or(0.0);
        let im = (&self.im >> shift).to_f64().unwrap_or(0.0);
        LogComplex::from_complex(Complex64::new(re, im)).scale_pow2(shift as i64 + exp2)
    }
}

/// `round(x * 2^shift)`.
fn to_fixed(x: f64, shift: i64) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let (mant, exp, sign) = x.integer_decode();
    let s = exp as i64 + shift;
    let mag = if s >= 0 {
        BigInt::from(mant) << (s as usize)
    } else {
        let k = (-s) as u32;
        if k > 64 {
            BigInt::zero()
        } else {
            let m = mant as u128;
            BigInt::from((m + (1u128 << (k - 1))) >> k)
        }
    };
    if sign < 0 {
        -mag
    } else {
        mag
    }
}

struct RyserCtx {
    /// `(n_k, fixed-point row of U restricted to occupied columns)`.
    rows: Vec<(usize, Vec<Fx>)>,
    /// Occupied column multiplicities.
    cols: Vec<usize>,
    binoms: Vec<Vec<BigInt>>,
    total: usize,
    precision: usize,
}

struct Partial {
    sum: Fx,
    terms: u64,
    flops: u64,
}

impl RyserCtx {
    /// Inclusion-exclusion terms whose first column digit equals `d0`.
    fn chunk(&self, d0: usize) -> Partial {
        let ncols = self.cols.len();
        let mut r = vec![0usize; ncols];
        r[0] = d0;
        let mut sums: Vec<Fx> = self
            .rows
            .iter()
            .map(|(_, u)| {
                let mut s = Fx::zero();
                for (j, uj) in u.iter().enumerate() {
                    s.add_assign(&uj.scaled(self.cols[j] - r[j]));
                }
                s
            })
            .collect();
        let mut out = Partial { sum: Fx::zero(), terms: 0, flops: 0 };
        loop {
            let removed: usize = r.iter().sum();
            if removed < self.total {
                let kept = r.iter().zip(&self.cols).filter(|(a, b)| a < b).count() as u64;
                out.terms += 1;
                out.flops += self.total as u64 * kept;
                let mut prod: Option<Fx> = None;
                for ((nk, _), s) in self.rows.iter().zip(&sums) {
                    for _ in 0..*nk {
                        prod = Some(match prod {
                            None => s.clone(),
                            Some(p) => p.mul_shift(s, self.precision),
                        });
                    }
                }
                let mut b = BigInt::from(1u8);
                for (j, &rj) in r.iter().enumerate() {
                    b *= &self.binoms[j][rj];
                }
                let term = prod.expect("at least one particle").mul_int(&b);
                if removed % 2 == 0 {
                    out.sum.add_assign(&term);
                } else {
                    out.sum.sub_assign(&term);
                }
            }
            // odometer step over digits 1..ncols, last digit fastest
            let mut j = ncols;
            loop {
                if j == 1 {
                    return out;
                }
                j -= 1;
                if r[j] < self.cols[j] {
                    r[j] += 1;
                    for (s, (_, u)) in sums.iter_mut().zip(&self.rows) {
                        s.sub_assign(&u[j]);
                    }
                    break;
                }
                let back = r[j];
                r[j] = 0;
                for (s, (_, u)) in sums.iter_mut().zip(&self.rows) {
                    s.add_assign(&u[j].scaled(back));
                }
            }
        }
    }
}

/// `per(A[n|m])` by inclusion-exclusion over crossed-out column multiplicities,
/// evaluated in fixed-point big-integer arithmetic.
///
/// Each row sum is scaled by a power of two so that its modulus is at most 1,
/// and products are truncated to `P` fraction bits. The accumulated rounding
/// error is below `(N^2 + 2N) 2^(N - P)` in scaled units; `P` is raised until
/// that bound is under `2^-50` of the result. A sum that stays inside the
/// bound up to the precision cap is returned as zero, uncertified.
pub fn permanent_repeated(a: &DMatrix<Complex64>, n: &[usize], m: &[usize]) -> RyserReport {
    let total: usize = n.iter().sum();
    assert_eq!(total, m.iter().sum::<usize>(), "margins must have equal totals");
    assert!(total >= 1, "need at least one particle");
    let col_idx: Vec<usize> = (0..m.len()).filter(|&l| m[l] > 0).collect();
    let row_idx: Vec<usize> = (0..n.len()).filter(|&k| n[k] > 0).collect();
    let cols: Vec<usize> = col_idx.iter().map(|&l| m[l]).collect();
    let terms = cols.iter().map(|&c| c as u64 + 1).product::<u64>() - 1;

    let mut exps = Vec::with_capacity(row_idx.len());
    for &k in &row_idx {
        let s: f64 = col_idx.iter().map(|&l| m[l] as f64 * a[(k, l)].norm()).sum();
        if s == 0.0 {
            return RyserReport { value: LogComplex::ZERO, terms, flops: 0, precision_bits: 0, certified: true };
        }
        let (mant, e) = frexp(s);
        exps.push(if mant == 1.0 { e } else { e + 1 });
    }
    let out_exp2: i64 = row_idx.iter().zip(&exps).map(|(&k, &e)| e * n[k] as i64).sum();

    let nn = total as f64;
    let slack = (nn * nn + 2.0 * nn).log2().ceil() as usize;
    let need = total + slack + 50;
    let max_precision = total + slack + 64 + 4096;
    let binoms: Vec<Vec<BigInt>> = cols.iter().map(|&c| binomial_row(c)).collect();

    let mut precision = total + slack + 64;
    let mut zero_step = 128;
    loop {
        let rows = row_idx
            .iter()
            .zip(&exps)
            .map(|(&k, &e)| {
                let shift = precision as i64 - e;
                let u = col_idx
                    .iter()
                    .map(|&l| Fx { re: to_fixed(a[(k, l)].re, shift), im: to_fixed(a[(k, l)].im, shift) })
                    .collect();
                (n[k], u)
            })
            .collect();
        let ctx = RyserCtx { rows, cols: cols.clone(), binoms: binoms.clone(), total, precision };
        let parts: Vec<Partial> = (0..=cols[0]).into_par_iter().map(|d0| ctx.chunk(d0)).collect();
        let mut sum = Fx::zero();
        let mut flops = 0;
        let mut count = 0;
        for p in &parts {
            sum.add_assign(&p.sum);
            flops += p.flops;
            count += p.terms;
        }
        debug_assert_eq!(count, terms);
        let report = |value, certified| RyserReport { value, terms, flops, precision_bits: precision as u64, certified };
        let bits = sum.max_bits() as usize;
        // within the rounding bound: either a true zero or too little precision
        if bits <= total + slack {
            if precision >= max_precision {
                return report(LogComplex::ZERO, false);
            }
            precision = (precision + zero_step).min(max_precision);
            zero_step *= 2;
            continue;
        }
        if bits >= need {
            return report(sum.to_log(out_exp2 - precision as i64), true);
        }
        let next = precision + (need - bits) + 16;
        if next > max_precision {
            return report(sum.to_log(out_exp2 - precision as i64), false);
        }
        precision = next;
    }
}

pub fn permanent_ryser_repeated(spec: &RepeatedMatrixSpec) -> LogComplex {
    permanent_repeated(spec.base.matrix(), spec.row_reps.counts(), spec.col_reps.counts()).value
}

/// `per(U[n|m]) / sqrt(prod n_k! m_k!)`.
pub fn amplitude_exact(u: &NetworkMatrix, n: &Occupation, m: &Occupation) -> Result<LogComplex> {
    check_dims(u.dim(), n, m)?;
    let per = permanent_repeated(u.matrix(), n.counts(), m.counts()).value;
    Ok(per.scale_ln(-0.5 * (n.ln_factorial_product() + m.ln_factorial_product())))
}

/// `ln P(S | n, m) = ln(prod n! prod m! / (N! prod S!))`.
pub fn fisher_yates_ln_probability(table: &ContingencyTable) -> f64 {
    let n = table.row_sums.total() as u64;
    let cells: f64 = table.entries.iter().flatten().map(|&s| ln_factorial(s as u64)).sum();
    table.row_sums.ln_factorial_product() + table.col_sums.ln_factorial_product() - ln_factorial(n) - cells
}

/// Amplitude as `N! sum_S P(S) prod U^S / sqrt(prod n! m!)`.
pub fn amplitude_via_contingency_average(u: &NetworkMatrix, n: &Occupation, m: &Occupation) -> Result<LogComplex> {
    check_dims(u.dim(), n, m)?;
    let total = n.total();
    if total > CONTINGENCY_MAX {
        return Err(Error::TooLarge(format!("contingency expansion limited to N <= {CONTINGENCY_MAX}, got {total}")));
    }
    let mut acc = LogSum::new();
    for table in enumerate_contingency_tables(n, m)? {
        let mut term = LogComplex::from_ln(fisher_yates_ln_probability(&table));
        for (k, row) in table.entries.iter().enumerate() {
            for (l, &s) in row.iter().enumerate() {
                term = term * LogComplex::from_complex(u.get(k, l)).powi(s as i64);
            }
        }
        acc.add(term);
    }
    let scale = ln_factorial(total as u64) - 0.5 * (n.ln_factorial_product() + m.ln_factorial_product());
    Ok(acc.value().scale_ln(scale))
}

/// `per(|U|^2[n|m]) / prod m_k!`.
pub fn classical_probability(u: &NetworkMatrix, n: &Occupation, m: &Occupation) -> Result<f64> {
    check_dims(u.dim(), n, m)?;
    let a = u.intensities().map(|x| Complex64::new(x, 0.0));
    let per = permanent_repeated(&a, n.counts(), m.counts()).value;
    Ok(per.scale_ln(-m.ln_factorial_product()).to_complex().re)
}

/// Flop bounds `N T <= F <= M N T` with `T = prod (m_k + 1) - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FlopEstimate {
    pub lower: u64,
    pub upper: u64,
}

pub fn flop_estimate(n: &Occupation, m: &Occupation) -> FlopEstimate {
    let t = m.counts().iter().fold(1u64, |acc, &c| acc.saturating_mul(c as u64 + 1)) - 1;
    let lower = t.saturating_mul(n.total() as u64);
    FlopEstimate { lower, upper: lower.saturating_mul(m.len() as u64) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logcomplex::relative_error;
    use crate::network::haar_random_unitary;

    fn occ(v: &[usize]) -> Occupation {
        Occupation::new(v.to_vec()).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn naive_small_cases() {
        let ones = DMatrix::from_element(2, 2, c(1.0));
        assert!((permanent_naive(&ones).unwrap().to_complex() - c(2.0)).norm() < 1e-15);
        let id = DMatrix::<Complex64>::identity(3, 3);
        assert!((permanent_naive(&id).unwrap().to_complex() - c(1.0)).norm() < 1e-15);
        let bs = NetworkMatrix::beam_splitter();
        assert!(permanent_naive(bs.matrix()).unwrap().abs() < 1e-16);
        let big = DMatrix::<Complex64>::identity(11, 11);
        assert!(matches!(permanent_naive(&big), Err(Error::TooLarge(_))));
    }

    #[test]
    fn ryser_beam_splitter_values() {
        let bs = NetworkMatrix::beam_splitter();
        let hom = RepeatedMatrixSpec::new(bs.clone(), occ(&[1, 1]), occ(&[1, 1])).unwrap();
        assert!(permanent_ryser_repeated(&hom).is_zero());
        let bunched = RepeatedMatrixSpec::new(bs, occ(&[2, 0]), occ(&[1, 1])).unwrap();
        assert!((permanent_ryser_repeated(&bunched).to_complex() - c(-1.0)).norm() < 1e-15);
    }

    #[test]
    fn parity_zeros_survive_rounding() {
        let bs = NetworkMatrix::beam_splitter();
        for (input, output) in [([37, 37], [37, 37]), ([45, 45], [45, 45]), ([75, 25], [50, 50])] {
            let r = permanent_repeated(bs.matrix(), &input, &output);
            assert!(r.value.is_zero(), "{input:?} -> {output:?}: {}", r.value);
        }
        let r = permanent_repeated(bs.matrix(), &[76, 24], &[50, 50]);
        assert!(r.certified && !r.value.is_zero());
    }

    #[test]
    fn ryser_matches_naive_seed1() {
        let u = haar_random_unitary(3, 1).unwrap();
        let spec = RepeatedMatrixSpec::new(u, occ(&[3, 2, 2]), occ(&[2, 3, 2])).unwrap();
        let naive = permanent_naive(&spec.materialize()).unwrap();
        assert!(relative_error(permanent_ryser_repeated(&spec), naive) <= 1e-10);
    }

    #[test]
    fn amplitude_examples() {
        let bs = NetworkMatrix::beam_splitter();
        assert!(amplitude_exact(&bs, &occ(&[1, 1]), &occ(&[1, 1])).unwrap().is_zero());
        let a = amplitude_exact(&bs, &occ(&[1, 1]), &occ(&[2, 0])).unwrap().to_complex();
        assert!((a - c(-std::f64::consts::FRAC_1_SQRT_2)).norm() < 1e-15);
        let id = NetworkMatrix::identity(3).unwrap();
        let n = occ(&[4, 0, 2]);
        assert!((amplitude_exact(&id, &n, &n).unwrap().to_complex() - c(1.0)).norm() < 1e-14);
        assert!(matches!(amplitude_exact(&bs, &occ(&[1, 1]), &occ(&[3, 0])), Err(Error::MarginMismatch(_))));
    }

    #[test]
    fn fisher_yates_hom() {
        let tables: Vec<_> = enumerate_contingency_tables(&occ(&[1, 1]), &occ(&[1, 1])).unwrap().collect();
        for t in &tables {
            assert!((fisher_yates_ln_probability(t).exp() - 0.5).abs() < 1e-15);
        }
        let bs = NetworkMatrix::beam_splitter();
        assert!(amplitude_via_contingency_average(&bs, &occ(&[1, 1]), &occ(&[1, 1])).unwrap().abs() < 1e-15);
        let tr = NetworkMatrix::tritter();
        let n = occ(&[1, 1, 1]);
        let a = amplitude_via_contingency_average(&tr, &n, &n).unwrap();
        let b = amplitude_exact(&tr, &n, &n).unwrap();
        assert!(relative_error(a, b) <= 1e-10);
    }

    #[test]
    fn classical_examples() {
        let bs = NetworkMatrix::beam_splitter();
        let p = classical_probability(&bs, &occ(&[1, 1]), &occ(&[1, 1])).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let n = occ(&[2, 1]);
        let total: f64 = crate::network::enumerate_output_configs(2, 3)
            .map(|m| classical_probability(&bs, &n, &m).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn flop_bounds() {
        let f = flop_estimate(&occ(&[1, 1]), &occ(&[1, 1]));
        assert_eq!(f, FlopEstimate { lower: 6, upper: 12 });
        let m = occ(&[10, 10, 10]);
        assert_eq!(flop_estimate(&m, &m).lower, 39900);
    }

    #[test]
    fn fixed_point_rounding() {
        assert_eq!(to_fixed(0.75, 2), BigInt::from(3));
        assert_eq!(to_fixed(-0.75, 1), BigInt::from(-2));
        assert_eq!(to_fixed(1e-30, 10), BigInt::zero());
        assert_eq!(to_fixed(3.0, 100), BigInt::from(3) << 100usize);
    }

    #[test]
    fn deep_cancellation_is_certified() {
        // balanced beam splitter at N = 100: terms exceed the result by ~1e38
        let bs = NetworkMatrix::beam_splitter();
        let r = permanent_repeated(bs.matrix(), &[50, 50], &[50, 50]);
        assert!(r.certified);
        assert!(r.precision_bits > 100);
    }
}
