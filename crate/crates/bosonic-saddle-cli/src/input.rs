// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use bosonic_saddle::{NetworkMatrix, Occupation};
use num_complex::Complex64;
use serde::Deserialize;

use crate::CliError;

#[derive(Deserialize)]
struct MatrixFile {
    dim: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

/// Read a network matrix from JSON (`{"dim": M, "entries": [[[re, im], ...], ...]}`)
/// or CSV (`2M` columns per row, real and imaginary parts interleaved).
pub fn read_matrix(path: &Path) -> Result<NetworkMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let rows = if text.trim_start().starts_with('{') {
        parse_json_rows(&text)?
    } else {
        parse_csv_rows(&text)?
    };
    NetworkMatrix::from_rows(&rows).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn parse_json_rows(text: &str) -> Result<Vec<Vec<Complex64>>, CliError> {
    let file: MatrixFile = serde_json::from_str(text).map_err(|e| CliError::Input(format!("matrix json: {e}")))?;
    if file.entries.len() != file.dim || file.entries.iter().any(|r| r.len() != file.dim) {
        return Err(CliError::Input(format!("matrix json: entries are not {0}x{0}", file.dim)));
    }
    Ok(file.entries.iter().map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect()).collect())
}

pub fn parse_csv_rows(text: &str) -> Result<Vec<Vec<Complex64>>, CliError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Input(format!("matrix csv line {}: {e}", i + 1)))?;
        if vals.len() % 2 != 0 {
            return Err(CliError::Input(format!("matrix csv line {}: odd number of columns", i + 1)));
        }
        rows.push(vals.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect());
    }
    if rows.iter().any(|r: &Vec<Complex64>| r.len() != rows.len()) {
        return Err(CliError::Input(format!("matrix csv: expected {0} rows of {0} complex entries", rows.len())));
    }
    Ok(rows)
}

pub fn parse_occupation(s: &str) -> Result<Occupation, CliError> {
    Occupation::parse(s).map_err(|e| CliError::Input(e.to_string()))
}

/// Input and output mode fractions, e.g. `1/2,1/2:3/4,1/4`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fractions {
    pub input: Vec<(u64, u64)>,
    pub output: Vec<(u64, u64)>,
}

fn parse_ratio(t: &str) -> Result<(u64, u64), CliError> {
    let bad = || CliError::Input(format!("cannot parse fraction {t:?}"));
    let (num, den) = match t.trim().split_once('/') {
        Some((a, b)) => (a.trim().parse::<u64>().map_err(|_| bad())?, b.trim().parse::<u64>().map_err(|_| bad())?),
        None => (t.trim().parse::<u64>().map_err(|_| bad())?, 1),
    };
    if den == 0 {
        return Err(bad());
    }
    Ok((num, den))
}

fn parse_side(s: &str) -> Result<Vec<(u64, u64)>, CliError> {
    let v = s.split(',').map(parse_ratio).collect::<Result<Vec<_>, _>>()?;
    // compare a/b sums exactly: sum a_i * L / b_i == L
    let lcm = v.iter().fold(1u64, |l, &(_, d)| l / gcd(l, d) * d);
    let total: u64 = v.iter().map(|&(a, d)| a * (lcm / d)).sum();
    if total != lcm {
        return Err(CliError::Input(format!("fractions {s:?} do not sum to 1")));
    }
    Ok(v)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Fractions {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| CliError::Input(format!("fractions {s:?}: expected input:output")))?;
        let input = parse_side(a)?;
        let output = parse_side(b)?;
        if input.len() != output.len() {
            return Err(CliError::Input(format!("fractions {s:?}: {} input vs {} output modes", input.len(), output.len())));
        }
        Ok(Fractions { input, output })
    }

    pub fn dim(&self) -> usize {
        self.input.len()
    }

    /// Occupations at total `big_n`, if every fraction gives an integer.
    pub fn at(&self, big_n: usize) -> Option<(Occupation, Occupation)> {
        let side = |v: &[(u64, u64)]| -> Option<Vec<usize>> {
            v.iter()
                .map(|&(a, d)| {
                    let x = a * big_n as u64;
                    (x % d == 0).then_some((x / d) as usize)
                })
                .collect()
        };
        let n = Occupation::new(side(&self.input)?).ok()?;
        let m = Occupation::new(side(&self.output)?).ok()?;
        Some((n, m))
    }
}

/// `BOSONIC_SADDLE_THREADS`, if set.
pub fn thread_limit() -> Result<Option<usize>, CliError> {
    match std::env::var("BOSONIC_SADDLE_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(CliError::Input(format!("BOSONIC_SADDLE_THREADS={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}
