// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

//! Networks, occupations and contingency tables.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::combinatorics;
use crate::error::{Error, Result};

/// Maximum allowed `max |U^H U - I|`.
pub const UNITARITY_TOL: f64 = 1e-10;

/// An `M x M` unitary matrix, `M >= 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkMatrix {
    u: DMatrix<Complex64>,
}

pub fn unitarity_deviation(a: &DMatrix<Complex64>) -> f64 {
    let g = a.adjoint() * a;
    let mut dev: f64 = 0.0;
    for k in 0..g.nrows() {
        for l in 0..g.ncols() {
            let target = if k == l { 1.0 } else { 0.0 };
            dev = dev.max((g[(k, l)] - target).norm());
        }
    }
    dev
}

pub fn validate_unitary(a: DMatrix<Complex64>) -> Result<NetworkMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::BadDimension(format!("matrix is {}x{}, not square", a.nrows(), a.ncols())));
    }
    if a.nrows() < 2 {
        return Err(Error::BadDimension(format!("need M >= 2, got {}", a.nrows())));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NotUnitary { deviation: f64::NAN });
    }
    let deviation = unitarity_deviation(&a);
    if !(deviation <= UNITARITY_TOL) {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(NetworkMatrix { u: a })
}

impl NetworkMatrix {
    /// Row-major entries.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::BadDimension("rows have unequal length".into()));
        }
        validate_unitary(DMatrix::from_fn(m, m, |k, l| rows[k][l]))
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.u[(k, l)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.u
    }

    pub fn adjoint(&self) -> NetworkMatrix {
        NetworkMatrix { u: self.u.adjoint() }
    }

    /// Elementwise `|U_kl|^2`.
    pub fn intensities(&self) -> DMatrix<f64> {
        self.u.map(|z| z.norm_sqr())
    }

    /// `U'_{kl} = U_{rows[k], cols[l]}`.
    pub fn permuted(&self, rows: &[usize], cols: &[usize]) -> NetworkMatrix {
        let m = self.dim();
        NetworkMatrix { u: DMatrix::from_fn(m, m, |k, l| self.u[(rows[k], cols[l])]) }
    }

    pub fn identity(m: usize) -> Result<Self> {
        validate_unitary(DMatrix::identity(m, m))
    }

    /// Symmetric beam splitter `[[-1, 1], [1, 1]] / sqrt(2)`.
    pub fn beam_splitter() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(-s, 0.0), Complex64::new(s, 0.0), Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
        );
        NetworkMatrix { u }
    }

    /// Symmetric three-mode tritter with `omega = exp(2 pi i / 3)`.
    pub fn tritter() -> Self {
        let s = 1.0 / 3f64.sqrt();
        let w = Complex64::from_polar(s, 2.0 * PI / 3.0);
        let one = Complex64::new(s, 0.0);
        let u = DMatrix::from_row_slice(3, 3, &[one, one, one, one, w, w.conj(), one, w.conj(), w]);
        NetworkMatrix { u }
    }

    /// Discrete Fourier multiport, `|U_kl|^2 = 1/M`.
    pub fn fourier(m: usize) -> Result<Self> {
        let s = 1.0 / (m as f64).sqrt();
        validate_unitary(DMatrix::from_fn(m, m, |k, l| {
            Complex64::from_polar(s, 2.0 * PI * ((k * l) % m) as f64 / m as f64)
        }))
    }
}

/// Haar-distributed unitary from the QR decomposition of a complex Ginibre
/// matrix, with the columns of Q rotated by the phases of diag(R).
pub fn haar_random_unitary(m: usize, seed: u64) -> Result<NetworkMatrix> {
    if m < 2 {
        return Err(Error::BadDimension(format!("need M >= 2, got {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = DMatrix::from_fn(m, m, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re * s, im * s)
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..m {
            q[(i, j)] *= ph;
        }
    }
    validate_unitary(q)
}

/// Particle numbers per mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Occupation {
    counts: Vec<usize>,
}

impl Occupation {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidOccupation("no modes".into()));
        }
        if counts.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidOccupation("total particle number is zero".into()));
        }
        Ok(Occupation { counts })
    }

    pub(crate) fn new_unchecked(counts: Vec<usize>) -> Self {
        Occupation { counts }
    }

    /// Parse `"1,0,2"`.
    pub fn parse(s: &str) -> Result<Self> {
        let counts = s
            .split(',')
            .map(|t| {
                t.trim().parse::<usize>().map_err(|_| Error::InvalidOccupation(format!("cannot parse {t:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn strictly_positive(&self) -> bool {
        self.counts.iter().all(|&c| c >= 1)
    }

    /// `n_k / N`.
    pub fn fractions(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn scaled(&self, k: usize) -> Occupation {
        Occupation { counts: self.counts.iter().map(|&c| c * k).collect() }
    }

    /// `ln(prod_k n_k!)`.
    pub fn ln_factorial_product(&self) -> f64 {
        self.counts.iter().map(|&c| combinatorics::ln_factorial(c as u64)).sum()
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

pub(crate) fn check_margins(n: &Occupation, m: &Occupation) -> Result<()> {
    if n.len() != m.len() {
        return Err(Error::MarginMismatch(format!("{} input modes vs {} output modes", n.len(), m.len())));
    }
    if n.total() != m.total() {
        return Err(Error::MarginMismatch(format!("input total {} vs output total {}", n.total(), m.total())));
    }
    Ok(())
}

/// All weak compositions of `n` into `m` parts, first coordinate slowest.
///
/// `n = 0` yields the single all-zero configuration.
pub fn enumerate_output_configs(m: usize, n: usize) -> OutputConfigs {
    let current = if m == 0 {
        None
    } else {
        let mut c = vec![0; m];
        c[m - 1] = n;
        Some(c)
    };
    OutputConfigs { current }
}

pub fn count_output_configs(m: usize, n: usize) -> Option<u128> {
    combinatorics::count_compositions(m, n)
}

pub struct OutputConfigs {
    current: Option<Vec<usize>>,
}

impl Iterator for OutputConfigs {
    type Item = Occupation;

    fn next(&mut self) -> Option<Occupation> {
        let c = self.current.take()?;
        let m = c.len();
        let mut tail = 0;
        let mut next = None;
        for i in (0..m.saturating_sub(1)).rev() {
            tail += c[i + 1];
            if tail > 0 {
                let mut d = c.clone();
                d[i] += 1;
                for x in d.iter_mut().skip(i + 1) {
                    *x = 0;
                }
                d[m - 1] = tail - 1;
                next = Some(d);
                break;
            }
        }
        self.current = next;
        Some(Occupation::new_unchecked(c))
    }
}

/// Nonnegative integer matrix with prescribed row and column sums.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    pub entries: Vec<Vec<usize>>,
    pub row_sums: Occupation,
    pub col_sums: Occupation,
}

impl ContingencyTable {
    pub fn get(&self, k: usize, l: usize) -> usize {
        self.entries[k][l]
    }
}

/// Lazily enumerate every table with margins `n` (rows) and `m` (columns).
pub fn enumerate_contingency_tables(n: &Occupation, m: &Occupation) -> Result<ContingencyTables> {
    if n.total() != m.total() {
        return Err(Error::MarginMismatch(format!("row total {} vs column total {}", n.total(), m.total())));
    }
    let mut it = ContingencyTables {
        rows: n.counts.clone(),
        cols: m.counts.clone(),
        cells: vec![0; n.len() * m.len()],
        done: false,
        n: n.clone(),
        m: m.clone(),
    };
    it.fill_from(0);
    Ok(it)
}

pub struct ContingencyTables {
    rows: Vec<usize>,
    cols: Vec<usize>,
    cells: Vec<usize>,
    done: bool,
    n: Occupation,
    m: Occupation,
}

impl ContingencyTables {
    fn width(&self) -> usize {
        self.cols.len()
    }

    fn is_forced(&self, idx: usize) -> bool {
        let (k, l) = (idx / self.width(), idx % self.width());
        k + 1 == self.rows.len() || l + 1 == self.width()
    }

    /// Remaining row and column capacities just before cell `idx` is set.
    fn remaining(&self, idx: usize) -> (usize, Vec<usize>) {
        let c = self.width();
        let (k, l) = (idx / c, idx % c);
        let row_rem = self.rows[k] - self.cells[k * c..k * c + l].iter().sum::<usize>();
        let col_rem = (0..c).map(|j| self.cols[j] - (0..k).map(|i| self.cells[i * c + j]).sum::<usize>()).collect();
        (row_rem, col_rem)
    }

    fn bounds(&self, idx: usize) -> (usize, usize) {
        let l = idx % self.width();
        let (row_rem, col_rem) = self.remaining(idx);
        let later: usize = col_rem[l + 1..].iter().sum();
        (row_rem.saturating_sub(later), row_rem.min(col_rem[l]))
    }

    fn fill_from(&mut self, start: usize) {
        let c = self.width();
        for idx in start..self.cells.len() {
            let (k, l) = (idx / c, idx % c);
            self.cells[idx] = if k + 1 == self.rows.len() {
                self.remaining(idx).1[l]
            } else if l + 1 == c {
                self.remaining(idx).0
            } else {
                self.bounds(idx).0
            };
        }
    }

    fn advance(&mut self) {
        for idx in (0..self.cells.len()).rev() {
            if self.is_forced(idx) {
                continue;
            }
            let (_, hi) = self.bounds(idx);
            if self.cells[idx] < hi {
                self.cells[idx] += 1;
                self.fill_from(idx + 1);
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for ContingencyTables {
    type Item = ContingencyTable;

    fn next(&mut self) -> Option<ContingencyTable> {
        if self.done {
            return None;
        }
        let c = self.width();
        let entries = self.cells.chunks(c).map(|r| r.to_vec()).collect();
        self.advance();
        Some(ContingencyTable { entries, row_sums: self.n.clone(), col_sums: self.m.clone() })
    }
}

/// Coefficients `T_0..T_N` of `prod_k (1 + z + ... + z^{m_k})`.
pub fn count_tables_by_crossed_columns(m: &Occupation) -> Vec<u128> {
    let mut poly: Vec<u128> = vec![1];
    for &mk in m.counts() {
        let mut next = vec![0u128; poly.len() + mk];
        for (i, &a) in poly.iter().enumerate() {
            for j in 0..=mk {
                next[i + j] = next[i + j].saturating_add(a);
            }
        }
        poly = next;
    }
    poly
}
