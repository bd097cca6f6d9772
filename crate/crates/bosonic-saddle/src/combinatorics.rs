// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

use num_bigint::BigInt;

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    statrs::function::factorial::ln_factorial(n)
}

/// `C(n, k)`, or `None` when it does not fit in a `u128`.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is exact at every step
        let g = gcd(acc, (i + 1) as u128);
        let a = acc / g;
        let d = (i + 1) as u128 / g;
        acc = a.checked_mul((n - i) as u128 / d)?;
    }
    Some(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Row `C(n, 0..=n)` of Pascal's triangle as big integers.
pub fn binomial_row(n: usize) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n + 1);
    let mut c = BigInt::from(1u8);
    row.push(c.clone());
    for k in 0..n {
        c = c * (n - k) / (k + 1);
        row.push(c.clone());
    }
    row
}

/// Number of weak compositions of `n` into `m` parts, `C(m + n - 1, n)`.
pub fn count_compositions(m: usize, n: usize) -> Option<u128> {
    if m == 0 {
        return Some(if n == 0 { 1 } else { 0 });
    }
    binomial((m + n - 1) as u64, n as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binomials() {
        assert_eq!(binomial(30, 15), Some(155117520));
        assert_eq!(binomial(4, 3), Some(4));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(0, 0), Some(1));
        assert_eq!(count_compositions(3, 30), Some(496));
    }

    #[test]
    fn binomial_overflow_reported() {
        assert!(binomial(130, 65).is_some());
        assert!(binomial(140, 70).is_none());
    }

    #[test]
    fn big_row_matches_u128() {
        let row = binomial_row(60);
        for (k, c) in row.iter().enumerate() {
            assert_eq!(*c, BigInt::from(binomial(60, k as u64).unwrap()));
        }
    }

    #[test]
    fn ln_factorial_values() {
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(10) - 3628800f64.ln()).abs() < 1e-13);
    }
}
