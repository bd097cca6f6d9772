// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

//! Complex numbers stored as `(ln|z|, arg z)`.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::ops::{Div, Mul, Neg};

use num_complex::Complex64;
use serde::Serialize;

const TWO_PI: f64 = 2.0 * PI;

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    if phi > -PI && phi <= PI {
        return phi;
    }
    if !phi.is_finite() {
        return f64::NAN;
    }
    let mut r = phi.rem_euclid(TWO_PI);
    if r > PI {
        r -= TWO_PI;
    }
    if r <= -PI {
        r = PI;
    }
    r
}

/// Split a positive finite `x` into `(mantissa, exponent)` with mantissa in `[1, 2)`.
pub(crate) fn frexp(x: f64) -> (f64, i64) {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let e = ((bits >> 52) & 0x7ff) as i64;
    if e == 0 {
        let (m, k) = frexp(x * f64::from_bits(((64 + 1023) as u64) << 52));
        return (m, k - 64);
    }
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1023u64 << 52));
    (m, e - 1023)
}

/// `m * 2^e` without intermediate overflow.
pub(crate) fn ldexp(mut m: f64, mut e: i64) -> f64 {
    while e > 1023 {
        m *= f64::from_bits(2046u64 << 52);
        e -= 1023;
        if m.is_infinite() {
            return m;
        }
    }
    while e < -1022 {
        m *= f64::from_bits(1u64 << 52);
        e += 1022;
        if m == 0.0 {
            return m;
        }
    }
    m * f64::from_bits(((e + 1023) as u64) << 52)
}

/// A complex value `exp(log_mag) * exp(i phase)`.
///
/// The magnitude is held as a mantissa in `[1, 2)` times a power of two, so
/// values far outside the f64 range keep full relative precision. Exact zero
/// has `log_mag = -inf` and `phase = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogComplex {
    mant: f64,
    exp2: i64,
    phase: f64,
}

impl Serialize for LogComplex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("LogComplex", 2)?;
        st.serialize_field("log_mag", &finite_or_null(self.log_mag()))?;
        st.serialize_field("phase", &self.phase)?;
        st.end()
    }
}

fn finite_or_null(x: f64) -> Option<f64> {
    if x.is_finite() {
        Some(x)
    } else {
        None
    }
}

impl LogComplex {
    pub const ZERO: LogComplex = LogComplex { mant: 0.0, exp2: 0, phase: 0.0 };
    pub const ONE: LogComplex = LogComplex { mant: 1.0, exp2: 0, phase: 0.0 };

    pub fn new(log_mag: f64, phase: f64) -> Self {
        if log_mag == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let (mant, exp2) = split_ln(log_mag);
        LogComplex { mant, exp2, phase: wrap_phase(phase) }
    }

    fn from_parts(mag: f64, exp2: i64, phase: f64) -> Self {
        if mag == 0.0 {
            return Self::ZERO;
        }
        if !mag.is_finite() {
            return LogComplex { mant: mag, exp2: 0, phase: wrap_phase(phase) };
        }
        let (m, e) = frexp(mag);
        LogComplex { mant: m, exp2: exp2 + e, phase: wrap_phase(phase) }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z.re == 0.0 && z.im == 0.0 {
            return Self::ZERO;
        }
        Self::from_parts(z.norm(), 0, z.arg())
    }

    pub fn from_real(x: f64) -> Self {
        Self::from_complex(Complex64::new(x, 0.0))
    }

    /// `exp(x)` for real `x`, without forming the exponential.
    pub fn from_ln(x: f64) -> Self {
        Self::new(x, 0.0)
    }

    pub fn log_mag(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mant.ln() + self.exp2 as f64 * LN_2
    }

    /// `log2 |z|`.
    pub fn log2_mag(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mant.log2() + self.exp2 as f64
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn is_zero(&self) -> bool {
        self.mant == 0.0
    }

    pub fn abs(&self) -> f64 {
        ldexp(self.mant, self.exp2)
    }

    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.abs(), self.phase)
    }

    pub fn conj(&self) -> Self {
        if self.is_zero() {
            return *self;
        }
        LogComplex { phase: wrap_phase(-self.phase), ..*self }
    }

    pub fn inv(&self) -> Self {
        if self.is_zero() {
            return LogComplex { mant: f64::INFINITY, exp2: 0, phase: 0.0 };
        }
        Self::from_parts(1.0 / self.mant, -self.exp2, -self.phase)
    }

    pub fn powi(&self, k: i64) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        if self.is_zero() {
            return if k > 0 { Self::ZERO } else { self.inv() };
        }
        let (m, e) = split_ln(self.mant.ln() * k as f64);
        LogComplex { mant: m, exp2: e + self.exp2 * k, phase: wrap_phase(self.phase * k as f64) }
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        let (m, e) = if self.exp2 % 2 == 0 { (self.mant, self.exp2) } else { (2.0 * self.mant, self.exp2 - 1) };
        Self::from_parts(m.sqrt(), e / 2, 0.5 * self.phase)
    }

    /// Multiply by `exp(x)` for real `x`.
    pub fn scale_ln(&self, x: f64) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        *self * LogComplex::from_ln(x)
    }

    /// Multiply by `2^k`.
    pub fn scale_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        LogComplex { exp2: self.exp2 + k, ..*self }
    }

    pub fn add(&self, other: &LogComplex) -> Self {
        let mut s = LogSum::new();
        s.add(*self);
        s.add(*other);
        s.value()
    }

    pub fn sub(&self, other: &LogComplex) -> Self {
        self.add(&-*other)
    }
}

/// Split `exp(x)` into mantissa and binary exponent.
fn split_ln(x: f64) -> (f64, i64) {
    if !x.is_finite() {
        return (x.exp(), 0);
    }
    let k = (x / LN_2).floor();
    let r = x - k * LN_2;
    let (m, e) = frexp(r.exp());
    (m, e + k as i64)
}

impl Default for LogComplex {
    fn default() -> Self {
        Self::ZERO
    }
}

impl fmt::Display for LogComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp({})*exp(i*{})", self.log_mag(), self.phase)
    }
}

impl Mul for LogComplex {
    type Output = LogComplex;
    fn mul(self, rhs: LogComplex) -> LogComplex {
        if self.is_zero() || rhs.is_zero() {
            return LogComplex::ZERO;
        }
        LogComplex::from_parts(self.mant * rhs.mant, self.exp2 + rhs.exp2, self.phase + rhs.phase)
    }
}

impl Div for LogComplex {
    type Output = LogComplex;
    fn div(self, rhs: LogComplex) -> LogComplex {
        self * rhs.inv()
    }
}

impl Neg for LogComplex {
    type Output = LogComplex;
    fn neg(self) -> LogComplex {
        if self.is_zero() {
            return self;
        }
        LogComplex { phase: wrap_phase(self.phase + PI), ..self }
    }
}

/// Accumulator for sums of `LogComplex` terms.
///
/// Terms are rescaled by a power of two to the largest binary exponent seen so
/// far and summed with Neumaier compensation on each component.
#[derive(Clone, Debug)]
pub struct LogSum {
    anchor: Option<i64>,
    re: Neumaier,
    im: Neumaier,
    abs_sum: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn scale(&mut self, f: f64) {
        self.sum *= f;
        self.comp *= f;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSum {
    pub fn new() -> Self {
        LogSum { anchor: None, re: Neumaier::default(), im: Neumaier::default(), abs_sum: 0.0 }
    }

    pub fn add(&mut self, z: LogComplex) {
        if z.is_zero() {
            return;
        }
        let anchor = match self.anchor {
            Some(a) if a >= z.exp2 => a,
            Some(a) => {
                let f = ldexp(1.0, a - z.exp2);
                self.re.scale(f);
                self.im.scale(f);
                self.abs_sum *= f;
                self.anchor = Some(z.exp2);
                z.exp2
            }
            None => {
                self.anchor = Some(z.exp2);
                z.exp2
            }
        };
        let r = ldexp(z.mant, z.exp2 - anchor);
        let (s, c) = if z.phase == PI { (0.0, -1.0) } else { z.phase.sin_cos() };
        self.re.add(r * c);
        self.im.add(r * s);
        self.abs_sum += r;
    }

    pub fn value(&self) -> LogComplex {
        match self.anchor {
            None => LogComplex::ZERO,
            Some(a) => LogComplex::from_complex(Complex64::new(self.re.total(), self.im.total())).scale_pow2(a),
        }
    }

    /// Sum of the magnitudes of all terms added so far.
    pub fn abs_total(&self) -> LogComplex {
        match self.anchor {
            None => LogComplex::ZERO,
            Some(a) => LogComplex::from_real(self.abs_sum).scale_pow2(a),
        }
    }
}

impl FromIterator<LogComplex> for LogSum {
    fn from_iter<I: IntoIterator<Item = LogComplex>>(iter: I) -> Self {
        let mut s = LogSum::new();
        for z in iter {
            s.add(z);
        }
        s
    }
}

/// `|a - b| / |b|`, evaluated relative to the scale of `b`.
///
/// Returns 0 when both are zero and infinity when only `b` is.
pub fn relative_error(a: LogComplex, b: LogComplex) -> f64 {
    if b.is_zero() {
        return if a.is_zero() { 0.0 } else { f64::INFINITY };
    }
    if a.is_zero() {
        return 1.0;
    }
    let ra = Complex64::from_polar(ldexp(a.mant / b.mant, a.exp2 - b.exp2), a.phase);
    let rb = Complex64::from_polar(1.0, b.phase);
    (ra - rb).norm()
}
