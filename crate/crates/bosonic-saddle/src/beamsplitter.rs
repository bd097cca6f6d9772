// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

//! Closed forms for the balanced beam splitter `U = [[-1, 1], [1, 1]] / sqrt(2)`.

use std::f64::consts::SQRT_2;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::combinatorics::{binomial_row, ln_factorial};
use crate::error::{Error, Result};
use crate::logcomplex::{LogComplex, LogSum};
use crate::network::{NetworkMatrix, Occupation};
use crate::scaling::SaddleSolution;
use crate::saddle::saddle_exponent;

/// Default half-width of the coalescing band is `DEFAULT_BAND / N` in `gamma^2`.
pub const DEFAULT_BAND: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    Oscillatory,
    Decay,
    Coalescing,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Oscillatory => "oscillatory",
            Regime::Decay => "decay",
            Regime::Coalescing => "coalescing",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BeamSplitterCase {
    pub n1: usize,
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub regime: Regime,
    pub band: f64,
}

impl BeamSplitterCase {
    pub fn new(n1: usize, n2: usize, m1: usize, m2: usize) -> Result<Self> {
        Self::with_band(n1, n2, m1, m2, DEFAULT_BAND)
    }

    pub fn with_band(n1: usize, n2: usize, m1: usize, m2: usize, band: f64) -> Result<Self> {
        if n1 + n2 != m1 + m2 {
            return Err(Error::MarginMismatch(format!("{n1}+{n2} != {m1}+{m2}")));
        }
        let gamma = (m2 as f64 - m1 as f64) / (2.0 * ((n1 * n2) as f64).sqrt());
        let sigma = (n2 as f64 - n1 as f64) / (2.0 * ((m1 * m2) as f64).sqrt());
        let mut case = BeamSplitterCase { n1, n2, m1, m2, gamma, sigma, regime: Regime::Decay, band };
        case.regime = classify_regime(&case);
        Ok(case)
    }

    pub fn from_occupations(n: &Occupation, m: &Occupation) -> Result<Self> {
        if n.len() != 2 || m.len() != 2 {
            return Err(Error::BadDimension("beam splitter needs two modes".into()));
        }
        Self::new(n.counts()[0], n.counts()[1], m.counts()[0], m.counts()[1])
    }

    pub fn total(&self) -> usize {
        self.n1 + self.n2
    }

    /// `n2 - n1`.
    pub fn delta_n(&self) -> i64 {
        self.n2 as i64 - self.n1 as i64
    }

    /// `m2 - m1`.
    pub fn delta_m(&self) -> i64 {
        self.m2 as i64 - self.m1 as i64
    }

    /// `N^2 - dn^2 - dm^2 = 4 n1 n2 (1 - gamma^2)`.
    pub fn discriminant(&self) -> i128 {
        let n = self.total() as i128;
        n * n - (self.delta_n() as i128).pow(2) - (self.delta_m() as i128).pow(2)
    }

    pub fn occupations(&self) -> (Occupation, Occupation) {
        (Occupation::new_unchecked(vec![self.n1, self.n2]), Occupation::new_unchecked(vec![self.m1, self.m2]))
    }

    fn require_positive(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.m1 == 0 || self.m2 == 0 {
            return Err(Error::EmptyMode);
        }
        Ok(())
    }
}

/// Oscillatory for `gamma^2 < 1`, decay for `gamma^2 > 1`, coalescing within
/// `band / N` of the boundary.
pub fn classify_regime(case: &BeamSplitterCase) -> Regime {
    let g2 = case.gamma * case.gamma;
    let n = case.total() as f64;
    if n > 0.0 && (g2 - 1.0).abs() <= case.band / n {
        Regime::Coalescing
    } else if case.discriminant() > 0 {
        Regime::Oscillatory
    } else {
        Regime::Decay
    }
}

/// `e^{i phi} = gamma -+ i sqrt(1 - gamma^2)`, index 0 taking the minus sign.
fn phase_factor(case: &BeamSplitterCase, index: usize) -> Complex64 {
    let root = Complex64::new(1.0 - case.gamma * case.gamma, 0.0).sqrt();
    let s = if index == 0 { -1.0 } else { 1.0 };
    case.gamma + Complex64::i() * root * s
}

fn raw_saddle(case: &BeamSplitterCase, index: usize) -> SaddleSolution {
    let n = case.total() as f64;
    let (n1, n2) = (case.n1 as f64, case.n2 as f64);
    let h = phase_factor(case, index).sqrt();
    let x = vec![(n1 / n).sqrt() * h, (n2 / n).sqrt() / h];
    let a = n1 / (n * x[0]);
    let b = n2 / (n * x[1]);
    let y = vec![(b - a) / SQRT_2, (a + b) / SQRT_2];
    let f = [n1 / n, n2 / n];
    let g = [case.m1 as f64 / n, case.m2 as f64 / n];
    SaddleSolution::from_xy(NetworkMatrix::beam_splitter().matrix(), x, y, &f, &g)
}

/// The two saddles in closed form, gauge-canonical.
///
/// In the decay regime `sqrt(1 - gamma^2)` continues to `i sqrt(gamma^2 - 1)`
/// and both saddles become real.
pub fn analytic_saddles(case: &BeamSplitterCase) -> Result<[SaddleSolution; 2]> {
    case.require_positive()?;
    Ok([raw_saddle(case, 0).canonical(), raw_saddle(case, 1).canonical()])
}

/// `e^{i delta} = i x1 x2 y1 y2 N^2 / sqrt(n1 n2 m1 m2)`; unit modulus in the
/// oscillatory regime.
pub fn delta_phase(case: &BeamSplitterCase, index: usize) -> Result<Complex64> {
    case.require_positive()?;
    let s = raw_saddle(case, index);
    let n = case.total() as f64;
    let norm = ((case.n1 * case.n2) as f64).sqrt() * ((case.m1 * case.m2) as f64).sqrt();
    Ok(Complex64::i() * s.x[0] * s.x[1] * s.y[0] * s.y[1] * n * n / norm)
}

/// `det D' = +-(1/8) e^{i delta} sqrt(1 - a^2) sqrt(1 - b^2) sqrt(1 - a^2 - b^2)`
/// with `a = dn / N`, `b = dm / N`; `+` for saddle 0.
pub fn analytic_det(case: &BeamSplitterCase, index: usize) -> Result<Complex64> {
    let e = delta_phase(case, index)?;
    let n = case.total() as f64;
    let a = case.delta_n() as f64 / n;
    let b = case.delta_m() as f64 / n;
    let root = Complex64::new(case.discriminant() as f64 / (n * n), 0.0).sqrt();
    let s = if index == 0 { 1.0 } else { -1.0 };
    Ok(e * (s / 8.0) * (1.0 - a * a).sqrt() * (1.0 - b * b).sqrt() * root)
}

/// `K = sum_q (-1)^q C(n1, q) C(n2, m1 - q)`.
pub fn krawtchouk_sum(case: &BeamSplitterCase) -> BigInt {
    let r1 = binomial_row(case.n1);
    let r2 = binomial_row(case.n2);
    let lo = case.n1.saturating_sub(case.m2);
    let hi = case.n1.min(case.m1);
    let mut k = BigInt::zero();
    for q in lo..=hi {
        let t = &r1[q] * &r2[case.m1 - q];
        if q % 2 == 0 {
            k += t;
        } else {
            k -= t;
        }
    }
    k
}

/// Exact amplitude `sqrt(m1! m2! / (n1! n2!)) K / 2^(N/2)`.
///
/// The alternating sum is done in integers, so exact cancellations give an
/// exact zero.
pub fn amplitude_exact_bs(case: &BeamSplitterCase) -> LogComplex {
    let k = krawtchouk_sum(case);
    if k.is_zero() {
        return LogComplex::ZERO;
    }
    let bits = k.bits();
    let shift = bits.saturating_sub(60);
    let top: BigInt = k.abs() >> shift;
    let mag = top.to_f64().unwrap_or(f64::INFINITY);
    let phase = if k.is_negative() { std::f64::consts::PI } else { 0.0 };
    let lf = |v: usize| ln_factorial(v as u64);
    let scale = 0.5 * (lf(case.m1) + lf(case.m2) - lf(case.n1) - lf(case.n2)) - 0.5 * case.total() as f64 * std::f64::consts::LN_2;
    LogComplex::new(mag.ln(), phase).scale_pow2(shift as i64).scale_ln(scale)
}

/// One saddle of the closed-form assembly.
#[derive(Clone, Debug)]
pub struct AnalyticTerm {
    pub solution: SaddleSolution,
    pub det: Complex64,
    /// `E / sqrt(det)` on the principal branch.
    pub term: LogComplex,
    pub contributing: bool,
}

/// Both saddles with determinants and terms. In the decay regime only the
/// smaller term contributes.
pub fn analytic_terms(case: &BeamSplitterCase) -> Result<Vec<AnalyticTerm>> {
    let sols = analytic_saddles(case)?;
    let (n, m) = case.occupations();
    let mut out = Vec::with_capacity(2);
    for (i, s) in sols.into_iter().enumerate() {
        let det = analytic_det(case, i)?;
        let e = saddle_exponent(&s, &n, &m)?;
        out.push(AnalyticTerm { solution: s, det, term: e / LogComplex::from_complex(det).sqrt(), contributing: true });
    }
    if case.discriminant() <= 0 {
        let drop = if out[0].term.log_mag() <= out[1].term.log_mag() { 1 } else { 0 };
        out[drop].contributing = false;
    }
    Ok(out)
}

/// Amplitude from the closed-form saddles with one sign per contributing
/// saddle, in index order.
pub fn amplitude_closed_form(case: &BeamSplitterCase, signs: &[i8]) -> Result<LogComplex> {
    let terms = analytic_terms(case)?;
    let mut sum = LogSum::new();
    for (t, &s) in terms.iter().filter(|t| t.contributing).zip(signs.iter().chain(std::iter::repeat(&1))) {
        sum.add(if s < 0 { -t.term } else { t.term });
    }
    let (n, m) = case.occupations();
    let f = n.fractions();
    let g = m.fractions();
    let ln_fg: f64 = f.iter().chain(&g).map(|v| v.ln()).sum();
    let scale = ln_factorial(case.total() as u64) + 0.5 * ln_fg - 0.5 * (n.ln_factorial_product() + m.ln_factorial_product());
    Ok(sum.value().scale_ln(scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::amplitude_exact;
    use crate::logcomplex::relative_error;
    use crate::saddle::{amplitude_approx_with, det_dprime, ApproxOptions, HessianBlocks};
    use crate::scaling::{solve_all_saddles, ScalingProblem};
    use proptest::prelude::*;

    fn case(n1: usize, n2: usize, m1: usize, m2: usize) -> BeamSplitterCase {
        BeamSplitterCase::new(n1, n2, m1, m2).unwrap()
    }

    #[test]
    fn regimes() {
        assert_eq!(case(10, 50, 30, 30).regime, Regime::Oscillatory);
        assert_eq!(case(10, 50, 5, 55).regime, Regime::Decay);
        assert_eq!(case(10, 50, 8, 52).regime, Regime::Coalescing);
        assert_eq!(case(10, 50, 10, 50).regime, Regime::Oscillatory);
        assert_eq!(BeamSplitterCase::with_band(10, 50, 10, 50, 12.5).unwrap().regime, Regime::Coalescing);
        assert!(matches!(BeamSplitterCase::new(1, 2, 2, 2), Err(Error::MarginMismatch(_))));
    }

    #[test]
    fn balanced_saddles() {
        let c = case(15, 15, 15, 15);
        assert_eq!(c.gamma, 0.0);
        assert!((phase_factor(&c, 0) + Complex64::i()).norm() < 1e-15);
        assert!((phase_factor(&c, 1) - Complex64::i()).norm() < 1e-15);
        let s = analytic_saddles(&c).unwrap();
        let mut p11: Vec<Complex64> = s.iter().map(|s| s.p[(0, 0)]).collect();
        p11.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((p11[0] - Complex64::new(0.25, -0.25)).norm() < 1e-15);
        assert!((p11[1] - Complex64::new(0.25, 0.25)).norm() < 1e-15);
        for i in 0..2 {
            assert!((analytic_det(&c, i).unwrap().norm() - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn decay_saddles_are_real() {
        let c = case(10, 50, 2, 58);
        for s in analytic_saddles(&c).unwrap() {
            assert!(s.residual <= 1e-12);
            for v in s.p.iter() {
                assert!(v.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn determinant_vanishes_at_boundary() {
        let mut last = f64::INFINITY;
        for m1 in [30, 20, 12, 9, 8] {
            let d = analytic_det(&case(10, 50, m1, 60 - m1), 0).unwrap().norm();
            assert!(d < last);
            last = d;
        }
        assert!(last < 0.01);
        let near = analytic_det(&case(1000, 1000, 1, 1999), 0).unwrap().norm();
        assert!(near < 1e-3, "{near}");
    }

    #[test]
    fn empty_mode_rejected() {
        assert!(matches!(analytic_saddles(&case(0, 4, 2, 2)), Err(Error::EmptyMode)));
        assert!(matches!(analytic_det(&case(2, 2, 4, 0), 1), Err(Error::EmptyMode)));
    }

    #[test]
    fn matches_solver_roots() {
        for (n1, n2, m1, m2) in [(15, 15, 15, 15), (10, 20, 12, 18), (10, 50, 2, 58), (10, 50, 58, 2), (50, 10, 30, 30), (7, 3, 9, 1)] {
            let c = case(n1, n2, m1, m2);
            let (n, m) = c.occupations();
            let roots = solve_all_saddles(&ScalingProblem::new(NetworkMatrix::beam_splitter(), n.clone(), m.clone()).unwrap(), 100, 0).unwrap();
            assert_eq!(roots.len(), 2);
            for (i, s) in analytic_saddles(&c).unwrap().iter().enumerate() {
                let r = roots.iter().find(|r| r.p_distance(s) <= 1e-9).expect("analytic saddle among roots");
                let general = det_dprime(&HessianBlocks::from_solution(r, &n, &m)).unwrap();
                let analytic = analytic_det(&c, i).unwrap();
                assert!((general - analytic).norm() <= 1e-10 * general.norm(), "{c:?} {i}: {general} {analytic}");
            }
        }
    }

    #[test]
    fn exact_examples() {
        assert!(amplitude_exact_bs(&case(1, 1, 1, 1)).is_zero());
        let a = amplitude_exact_bs(&case(1, 1, 2, 0)).to_complex();
        assert!((a - Complex64::new(-0.5f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!((amplitude_exact_bs(&case(3, 0, 0, 3)).abs() - 0.5f64.powf(1.5)).abs() < 1e-15);
    }

    #[test]
    fn exact_matches_ryser() {
        let bs = NetworkMatrix::beam_splitter();
        for total in 1..=12usize {
            for n1 in 0..=total {
                for m1 in 0..=total {
                    let c = case(n1, total - n1, m1, total - m1);
                    let (n, m) = c.occupations();
                    let a = amplitude_exact_bs(&c);
                    let b = amplitude_exact(&bs, &n, &m).unwrap();
                    if b.is_zero() {
                        assert!(a.is_zero());
                    } else {
                        assert!(relative_error(a, b) <= 1e-10, "{c:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn generalized_hom_zeros() {
        for half in 1..=40 {
            for m1 in (1..2 * half).step_by(2) {
                assert!(amplitude_exact_bs(&case(half, half, m1, 2 * half - m1)).is_zero());
            }
        }
    }

    #[test]
    fn closed_form_matches_pipeline() {
        let opts = ApproxOptions { calibrate: false, ..ApproxOptions::default() };
        for (n1, n2, m1, m2) in [(15, 15, 12, 18), (10, 20, 12, 18), (10, 50, 2, 58), (20, 40, 30, 30), (45, 15, 20, 40)] {
            let c = case(n1, n2, m1, m2);
            let (n, m) = c.occupations();
            let general = amplitude_approx_with(&NetworkMatrix::beam_splitter(), &n, &m, &opts).unwrap();
            let closed = amplitude_closed_form(&c, &[]).unwrap();
            assert!(relative_error(general.amplitude, closed) <= 1e-10, "{c:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn phase_and_product_identities(n1 in 1usize..100, n2 in 1usize..100, m1 in 1usize..199) {
            let total = n1 + n2;
            prop_assume!(m1 < total);
            let c = case(n1, n2, m1, total - m1);
            let d = c.discriminant();
            let lhs_n = 4.0 * (n1 * n2) as f64 * (1.0 - c.gamma * c.gamma);
            let lhs_m = 4.0 * (m1 * (total - m1)) as f64 * (1.0 - c.sigma * c.sigma);
            prop_assert!((lhs_n - d as f64).abs() <= 1e-9 * (total * total) as f64);
            prop_assert!((lhs_m - d as f64).abs() <= 1e-9 * (total * total) as f64);
            let t = total as i128;
            let prod = 16 * (n1 * n2) as i128 * (m1 * (total - m1)) as i128;
            prop_assert_eq!(prod, (t * t - (c.delta_n() as i128).pow(2)) * (t * t - (c.delta_m() as i128).pow(2)));
            prop_assert_eq!(c.regime == Regime::Oscillatory, d > 0 && (c.gamma * c.gamma - 1.0).abs() > 10.0 / total as f64);
        }

        #[test]
        fn analytic_det_matches_general(n1 in 1usize..100, n2 in 1usize..100, m1 in 1usize..199) {
            let total = n1 + n2;
            prop_assume!(m1 < total);
            let c = case(n1, n2, m1, total - m1);
            prop_assume!(c.discriminant() != 0);
            let (n, m) = c.occupations();
            for (i, s) in analytic_saddles(&c).unwrap().iter().enumerate() {
                prop_assert!(s.residual <= 1e-12);
                let general = det_dprime(&HessianBlocks::from_solution(s, &n, &m)).unwrap();
                let analytic = analytic_det(&c, i).unwrap();
                prop_assert!((general - analytic).norm() <= 1e-10 * general.norm());
            }
        }
    }
}
