// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

//! Frozen reference values. Exact amplitudes were computed independently
//! with 40-digit coefficient extraction from `prod_k (sum_l U_kl y_l)^n_k`.

use bosonic_saddle::beamsplitter::{analytic_saddles, BeamSplitterCase};
use bosonic_saddle::combinatorics::ln_factorial;
use bosonic_saddle::exact::{amplitude_via_contingency_average, classical_probability};
use bosonic_saddle::network::{count_output_configs, count_tables_by_crossed_columns, enumerate_contingency_tables};
use bosonic_saddle::{
    amplitude_approx, amplitude_exact, amplitude_exact_bs, classical_probability_approx, classify_regime, flop_estimate,
    NetworkMatrix, Occupation, Regime,
};
use num_complex::Complex64;

fn occ(v: &[usize]) -> Occupation {
    Occupation::new(v.to_vec()).unwrap()
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1e-300)
}

const BS_EXACT: [([usize; 2], [usize; 2], f64); 5] = [
    ([15, 15], [10, 20], -0.208_233_026_357_745_787_47),
    ([10, 50], [30, 30], -0.166_223_398_688_644_901_39),
    ([10, 50], [2, 58], 0.004_680_289_250_392_514_946_1),
    ([2, 1], [1, 2], -0.353_553_390_593_273_762_2),
    ([1, 1], [2, 0], -0.707_106_781_186_547_524_4),
];

#[test]
fn beam_splitter_amplitudes() {
    let bs = NetworkMatrix::beam_splitter();
    for (n, m, want) in BS_EXACT {
        let (n, m) = (occ(&n), occ(&m));
        let want = Complex64::new(want, 0.0);
        assert!(close(amplitude_exact(&bs, &n, &m).unwrap().to_complex(), want, 1e-12), "{n} -> {m}");
        let case = BeamSplitterCase::from_occupations(&n, &m).unwrap();
        assert!(close(amplitude_exact_bs(&case).to_complex(), want, 1e-12), "{n} -> {m}");
    }
}

#[test]
fn tritter_amplitudes() {
    let t = NetworkMatrix::tritter();
    let cases = [
        ([4, 4, 4], [4, 4, 4], Complex64::new(1.0 / 81.0, 0.0)),
        ([3, 2, 1], [1, 2, 3], Complex64::new(1.0 / 6.0, 0.160_375_074_774_896_045_7)),
        ([5, 4, 3], [2, 5, 5], Complex64::new(-0.047_814_609_212_437_245_496, 0.0)),
    ];
    for (n, m, want) in cases {
        let (n, m) = (occ(&n), occ(&m));
        assert!(close(amplitude_exact(&t, &n, &m).unwrap().to_complex(), want, 1e-12), "{n} -> {m}");
    }
    let one = occ(&[1, 1, 1]);
    let a = amplitude_exact(&t, &one, &one).unwrap();
    let b = amplitude_via_contingency_average(&t, &one, &one).unwrap();
    assert!(close(b.to_complex(), a.to_complex(), 1e-12));
}

#[test]
fn identity_network_preserves_fock_states() {
    for dim in 2..=4 {
        let id = NetworkMatrix::identity(dim).unwrap();
        let n = occ(&(1..=dim).collect::<Vec<_>>());
        assert!(close(amplitude_exact(&id, &n, &n).unwrap().to_complex(), Complex64::new(1.0, 0.0), 1e-15));
    }
}

#[test]
fn counting() {
    assert_eq!(count_output_configs(3, 30), Some(496));
    assert_eq!(count_output_configs(2, 3), Some(4));
    assert_eq!(enumerate_contingency_tables(&occ(&[2, 2]), &occ(&[2, 2])).unwrap().count(), 3);
    assert_eq!(count_tables_by_crossed_columns(&occ(&[2, 1])), vec![1, 2, 2, 1]);
    let t = count_tables_by_crossed_columns(&occ(&[1, 1]));
    assert_eq!(t[0] + t[1], 3);
    let f = flop_estimate(&occ(&[10, 10, 10]), &occ(&[10, 10, 10]));
    assert_eq!(f.lower, 39_900);
    assert_eq!(f.upper, 119_700);
}

#[test]
fn classical_values() {
    let bs = NetworkMatrix::beam_splitter();
    assert!((classical_probability(&bs, &occ(&[1, 1]), &occ(&[1, 1])).unwrap() - 0.5).abs() < 1e-15);
    let want = (ln_factorial(30) - 30.0 * 2f64.ln() - ln_factorial(10) - ln_factorial(20)).exp();
    let p = classical_probability_approx(&bs, &occ(&[15, 15]), &occ(&[10, 20])).unwrap();
    assert!((p - want).abs() <= 1e-12 * want);
    let total: f64 = [[3, 0], [2, 1], [1, 2], [0, 3]]
        .iter()
        .map(|m| classical_probability(&bs, &occ(&[2, 1]), &occ(m)).unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-14);
}

#[test]
fn regimes_along_n60_n1_10() {
    let case = |m1: usize| BeamSplitterCase::new(10, 50, m1, 60 - m1).unwrap();
    assert_eq!(classify_regime(&case(30)), Regime::Oscillatory);
    assert_eq!(classify_regime(&case(5)), Regime::Decay);
    assert_eq!(classify_regime(&case(8)), Regime::Coalescing);
    let [a, b] = analytic_saddles(&case(2)).unwrap();
    for s in [a, b] {
        assert!(s.p.iter().all(|z| z.im.abs() < 1e-12));
    }
}

/// Regression values of the approximation, seed 0.
#[test]
fn approximation_regression() {
    let bs = NetworkMatrix::beam_splitter();
    let cases = [
        ([15, 15], [10, 20], -2.102_629_908_368_504_05e-1, 2),
        ([10, 50], [30, 30], -1.676_577_164_330_478_88e-1, 2),
        ([10, 50], [2, 58], 4.689_146_992_197_616_54e-3, 1),
    ];
    for (n, m, want, contributing) in cases {
        let a = amplitude_approx(&bs, &occ(&n), &occ(&m), 0).unwrap();
        assert!(close(a.amplitude.to_complex(), Complex64::new(want, 0.0), 1e-9), "{n:?} -> {m:?}");
        assert_eq!(a.diagnostics.contributing_count, contributing);
    }
}
