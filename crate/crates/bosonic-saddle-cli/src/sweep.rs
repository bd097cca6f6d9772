// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use bosonic_saddle::exact::permanent_repeated;
use bosonic_saddle::saddle::{multinomial_approx, multinomial_ln_exact};
use bosonic_saddle::{amplitude_approx, amplitude_exact, flop_estimate, relative_error, Error, NetworkMatrix, Occupation};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::input::Fractions;
use crate::{cell, to_json, CliError, Outcome, CSV_HEADER, SCHEMA};

/// Exact comparisons stop once the Ryser flop bound passes this.
pub const EXACT_FLOP_LIMIT: u64 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowRegime {
    Simple,
    Cancelled,
    Coalescing,
    NoSaddles,
}

impl RowRegime {
    fn as_str(self) -> &'static str {
        match self {
            RowRegime::Simple => "simple",
            RowRegime::Cancelled => "cancelled",
            RowRegime::Coalescing => "coalescing",
            RowRegime::NoSaddles => "no-saddles",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub big_n: usize,
    pub n: Occupation,
    pub m: Occupation,
    pub exact: Option<Complex64>,
    /// Empty when the approximation is flagged.
    pub approx: Option<Complex64>,
    pub rel_error: Option<f64>,
    pub stirling_ref: Option<f64>,
    pub regime: RowRegime,
    pub saddle_count: Option<usize>,
    pub contributing_count: Option<usize>,
    pub min_det: Option<f64>,
    pub coalescence_measure: Option<f64>,
    pub wall_time_exact: Option<f64>,
    pub wall_time_approx: Option<f64>,
}

impl SweepRow {
    /// `E(N) N`.
    pub fn c_n(&self) -> Option<f64> {
        self.rel_error.map(|e| e * self.big_n as f64)
    }
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Relative error of the entropy form of the output multinomial, the
/// Stirling reference for a given `m`.
pub fn stirling_reference(m: &Occupation) -> Option<f64> {
    let approx = multinomial_approx(m).ok()?;
    Some((approx - multinomial_ln_exact(m)).exp_m1().abs())
}

fn sweep_row(u: &NetworkMatrix, big_n: usize, n: Occupation, m: Occupation, seed: u64, timings: bool) -> SweepRow {
    let mut row = SweepRow {
        big_n,
        exact: None,
        approx: None,
        rel_error: None,
        stirling_ref: stirling_reference(&m),
        regime: RowRegime::Simple,
        saddle_count: None,
        contributing_count: None,
        min_det: None,
        coalescence_measure: None,
        wall_time_exact: None,
        wall_time_approx: None,
        n,
        m,
    };
    let mut exact = None;
    if flop_estimate(&row.n, &row.m).upper <= EXACT_FLOP_LIMIT {
        let t = Instant::now();
        exact = amplitude_exact(u, &row.n, &row.m).ok();
        row.wall_time_exact = timings.then(|| t.elapsed().as_secs_f64());
        row.exact = exact.map(|z| z.to_complex());
    }
    let t = Instant::now();
    let result = amplitude_approx(u, &row.n, &row.m, seed);
    row.wall_time_approx = timings.then(|| t.elapsed().as_secs_f64());
    let approx = match result {
        Ok(a) => Some(a),
        Err(Error::CoalescingSaddles(a)) => {
            row.regime = RowRegime::Coalescing;
            row.saddle_count = Some(a.diagnostics.saddle_count);
            row.contributing_count = Some(a.diagnostics.contributing_count);
            row.min_det = Some(a.diagnostics.min_abs_det);
            row.coalescence_measure = Some(a.diagnostics.coalescence_measure);
            None
        }
        Err(_) => {
            row.regime = RowRegime::NoSaddles;
            None
        }
    };
    if let Some(a) = approx {
        if a.diagnostics.cancelled {
            row.regime = RowRegime::Cancelled;
        }
        row.saddle_count = Some(a.diagnostics.saddle_count);
        row.contributing_count = Some(a.diagnostics.contributing_count);
        row.min_det = Some(a.diagnostics.min_abs_det);
        row.coalescence_measure = Some(a.diagnostics.coalescence_measure);
        row.approx = Some(a.amplitude.to_complex());
        if let Some(e) = exact.filter(|e| !e.is_zero()) {
            row.rel_error = Some(relative_error(a.amplitude, e));
        }
    }
    row
}

/// Exact against approximate amplitudes along a line of fixed fractions.
/// Rows run in parallel and come back in `N` order.
pub fn error_sweep(
    u: &NetworkMatrix,
    fractions: &Fractions,
    n_min: usize,
    n_max: usize,
    n_step: usize,
    seed: u64,
    timings: bool,
) -> Result<SweepReport, CliError> {
    if fractions.dim() != u.dim() {
        return Err(CliError::Input(format!("matrix has {} modes but fractions give {}", u.dim(), fractions.dim())));
    }
    if n_step == 0 || n_min == 0 || n_min > n_max {
        return Err(CliError::Input(format!("bad N range {n_min}..={n_max} step {n_step}")));
    }
    let points: Vec<(usize, Occupation, Occupation)> = (n_min..=n_max)
        .step_by(n_step)
        .filter_map(|big_n| fractions.at(big_n).map(|(n, m)| (big_n, n, m)))
        .collect();
    if points.is_empty() {
        return Err(CliError::Input("no N in range gives integer occupations".into()));
    }
    let rows = points.into_par_iter().map(|(big_n, n, m)| sweep_row(u, big_n, n, m, seed, timings)).collect();
    Ok(SweepReport { rows })
}

pub fn render_sweep(report: &SweepReport) -> String {
    let dim = report.rows.first().map_or(0, |r| r.n.len());
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    let mut header = vec!["N".to_string()];
    header.extend((1..=dim).map(|k| format!("n{k}")));
    header.extend((1..=dim).map(|k| format!("m{k}")));
    header.extend(
        [
            "exact_re",
            "exact_im",
            "approx_re",
            "approx_im",
            "rel_error",
            "c_n",
            "stirling_ref",
            "regime",
            "saddle_count",
            "contributing_count",
            "min_det",
            "coalescence_measure",
            "wall_time_exact",
            "wall_time_approx",
        ]
        .map(String::from),
    );
    out.push_str(&header.join(","));
    out.push('\n');
    for r in &report.rows {
        let mut f = vec![r.big_n.to_string()];
        f.extend(r.n.counts().iter().chain(r.m.counts()).map(|c| c.to_string()));
        f.push(cell(r.exact.map(|z| z.re)));
        f.push(cell(r.exact.map(|z| z.im)));
        f.push(cell(r.approx.map(|z| z.re)));
        f.push(cell(r.approx.map(|z| z.im)));
        f.push(cell(r.rel_error));
        f.push(cell(r.c_n()));
        f.push(cell(r.stirling_ref));
        f.push(r.regime.as_str().to_string());
        f.push(r.saddle_count.map_or_else(String::new, |v| v.to_string()));
        f.push(r.contributing_count.map_or_else(String::new, |v| v.to_string()));
        f.push(cell(r.min_det));
        f.push(cell(r.coalescence_measure));
        f.push(cell(r.wall_time_exact));
        f.push(cell(r.wall_time_approx));
        out.push_str(&f.join(","));
        out.push('\n');
    }
    let pts: Vec<(f64, f64)> = report.rows.iter().filter_map(|r| Some((r.big_n as f64, r.rel_error?))).collect();
    out.push_str(&format!("# loglog_slope {}\n", cell(loglog_slope(&pts))));
    let cs: Vec<f64> = report.rows.iter().filter_map(SweepRow::c_n).collect();
    let mean_c = (!cs.is_empty()).then(|| cs.iter().sum::<f64>() / cs.len() as f64);
    out.push_str(&format!("# mean_c_n {}\n", cell(mean_c)));
    out
}

pub fn cmd_error_sweep(
    u: &NetworkMatrix,
    fractions: &Fractions,
    n_min: usize,
    n_max: usize,
    n_step: usize,
    seed: u64,
    timings: bool,
) -> Result<Outcome, CliError> {
    Ok(Outcome::ok(render_sweep(&error_sweep(u, fractions, n_min, n_max, n_step, seed, timings)?)))
}

/// `N` particles spread as evenly as possible, extras in the first modes.
pub fn uniform_occupation(dim: usize, big_n: usize) -> Result<Occupation, CliError> {
    let counts = (0..dim).map(|k| big_n / dim + usize::from(k < big_n % dim)).collect();
    Occupation::new(counts).map_err(|e| CliError::Input(e.to_string()))
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: Occupation,
    pub wall_times: Vec<f64>,
    pub median: f64,
    pub flops: u64,
    pub flops_lower: u64,
    pub flops_upper: u64,
    pub within_bounds: bool,
    pub precision_bits: u64,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

/// Time the exact engine on uniform occupations `n = m`.
pub fn bench(u: &NetworkMatrix, n_list: &[usize], repeats: usize) -> Result<(Vec<BenchRow>, Option<f64>), CliError> {
    let mut rows = Vec::new();
    for &big_n in n_list {
        let n = uniform_occupation(u.dim(), big_n)?;
        let est = flop_estimate(&n, &n);
        let mut times = Vec::new();
        let mut last = None;
        for _ in 0..repeats.max(1) {
            let t = Instant::now();
            let r = permanent_repeated(u.matrix(), n.counts(), n.counts());
            times.push(t.elapsed().as_secs_f64());
            last = Some(r);
        }
        let r = last.expect("at least one repeat");
        rows.push(BenchRow {
            big_n,
            median: median(&times),
            wall_times: times,
            flops: r.flops,
            flops_lower: est.lower,
            flops_upper: est.upper,
            within_bounds: est.lower <= r.flops && r.flops <= est.upper,
            precision_bits: r.precision_bits,
            n,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.big_n as f64, r.median)).collect();
    Ok((rows, loglog_slope(&pts)))
}

pub fn cmd_bench(u: &NetworkMatrix, n_list: &[usize], repeats: usize) -> Result<Outcome, CliError> {
    let (rows, exponent) = bench(u, n_list, repeats)?;
    let out = json!({
        "schema": SCHEMA,
        "dim": u.dim(),
        "repeats": repeats.max(1),
        "rows": rows,
        "runtime_exponent": exponent,
        "target_exponent": u.dim() + 1,
    });
    Ok(Outcome::ok(to_json(&out)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(-1.0))).collect();
        assert!((loglog_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn uniform_split() {
        assert_eq!(uniform_occupation(3, 31).unwrap().counts(), &[11, 10, 10]);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn stirling_reference_two_modes() {
        let m = Occupation::new(vec![6, 24]).unwrap();
        let direct = bosonic_saddle::saddle::stirling_binomial_error(30, 6);
        assert!((stirling_reference(&m).unwrap() - direct).abs() < 1e-15);
    }
}
