// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

use bosonic_saddle::exact::permanent_repeated;
use bosonic_saddle::network::{count_output_configs, enumerate_output_configs};
use bosonic_saddle::saddle::{classical_probability_approx, select_contributing};
use bosonic_saddle::{
    amplitude_approx, classical_probability, flop_estimate, relative_error, solve_all_saddles, Approximation, Error,
    LogComplex, NetworkMatrix, Occupation, ScalingProblem,
};
use clap::ValueEnum;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::{cell, to_json, CliError, Outcome, CSV_HEADER, EXIT_COALESCING, EXIT_NO_SADDLES, SCHEMA};

/// Largest output space `scan` walks without `--force`.
pub const SCAN_LIMIT: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exact,
    Approx,
    Classical,
    Both,
}

fn check_shape(u: &NetworkMatrix, n: &Occupation, m: &Occupation) -> Result<(), CliError> {
    if n.len() != u.dim() || m.len() != u.dim() {
        return Err(CliError::Input(format!(
            "matrix has {} modes but --in has {} and --out has {}",
            u.dim(),
            n.len(),
            m.len()
        )));
    }
    if n.total() != m.total() {
        return Err(CliError::Input(format!("--in totals {} but --out totals {}", n.total(), m.total())));
    }
    Ok(())
}

fn complex_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn record(method: &str, quantity: &str, value: LogComplex, diagnostics: Value) -> Value {
    let z = value.to_complex();
    json!({
        "method": method,
        "quantity": quantity,
        "log_mag": value.log_mag(),
        "phase": value.phase(),
        "re": z.re,
        "im": z.im,
        "diagnostics": diagnostics,
    })
}

fn exact_record(u: &NetworkMatrix, n: &Occupation, m: &Occupation) -> (LogComplex, Value) {
    let report = permanent_repeated(u.matrix(), n.counts(), m.counts());
    let amp = report.value.scale_ln(-0.5 * (n.ln_factorial_product() + m.ln_factorial_product()));
    let diag = json!({
        "precision_bits": report.precision_bits,
        "certified": report.certified,
        "terms": report.terms,
        "flops": report.flops,
        "flop_estimate": flop_estimate(n, m),
    });
    (amp, record("exact", "amplitude", amp, diag))
}

enum ApproxOutcome {
    Ok(Box<Approximation>),
    Coalescing(Box<Approximation>),
    Failed(CliError),
}

fn run_approx(u: &NetworkMatrix, n: &Occupation, m: &Occupation, seed: u64) -> ApproxOutcome {
    match amplitude_approx(u, n, m, seed) {
        Ok(a) => ApproxOutcome::Ok(Box::new(a)),
        Err(Error::CoalescingSaddles(a)) => ApproxOutcome::Coalescing(a),
        Err(e) => ApproxOutcome::Failed(e.into()),
    }
}

fn approx_record(a: &Approximation) -> Value {
    let diag = serde_json::to_value(&a.diagnostics).expect("diagnostics serialize");
    record("approx", "amplitude", a.amplitude, diag)
}

fn classical_record(method: &str, p: f64) -> Value {
    record(method, "probability", LogComplex::from_real(p), Value::Null)
}

/// One amplitude or classical probability, as a JSON record.
pub fn cmd_amplitude(u: &NetworkMatrix, n: &Occupation, m: &Occupation, method: Method, seed: u64) -> Result<Outcome, CliError> {
    check_shape(u, n, m)?;
    let with_schema = |mut v: Value| {
        v["schema"] = json!(SCHEMA);
        to_json(&v)
    };
    match method {
        Method::Exact => Ok(Outcome::ok(with_schema(exact_record(u, n, m).1))),
        Method::Classical => Ok(Outcome::ok(with_schema(classical_record("classical", classical_probability(u, n, m)?)))),
        Method::Approx => match run_approx(u, n, m, seed) {
            ApproxOutcome::Ok(a) => Ok(Outcome::ok(with_schema(approx_record(&a)))),
            ApproxOutcome::Coalescing(a) => Ok(Outcome { stdout: with_schema(approx_record(&a)), code: EXIT_COALESCING }),
            ApproxOutcome::Failed(e) => Err(e),
        },
        Method::Both => {
            let (exact, exact_rec) = exact_record(u, n, m);
            let mut code = 0;
            let (approx_rec, quantum_err) = match run_approx(u, n, m, seed) {
                ApproxOutcome::Ok(a) => (approx_record(&a), Some(relative_error(a.amplitude, exact))),
                ApproxOutcome::Coalescing(a) => {
                    code = EXIT_COALESCING;
                    (approx_record(&a), None)
                }
                ApproxOutcome::Failed(e) => {
                    code = e.exit_code();
                    (json!({ "method": "approx", "error": e.to_string() }), None)
                }
            };
            let classical = classical_probability(u, n, m)?;
            let (classical_approx_rec, classical_err) = match classical_probability_approx(u, n, m) {
                Ok(p) => (classical_record("classical-approx", p), Some(((p - classical) / classical).abs())),
                Err(e) => (json!({ "method": "classical-approx", "error": e.to_string() }), None),
            };
            let out = json!({
                "schema": SCHEMA,
                "method": "both",
                "records": [exact_rec, approx_rec, classical_record("classical", classical), classical_approx_rec],
                "rel_error": { "quantum": quantum_err, "classical": classical_err },
            });
            Ok(Outcome { stdout: to_json(&out), code })
        }
    }
}

struct ScanRow {
    exact: Option<Complex64>,
    approx: Option<Complex64>,
    status: &'static str,
    classical: Option<f64>,
    classical_approx: Option<f64>,
}

fn approx_status(u: &NetworkMatrix, n: &Occupation, m: &Occupation, seed: u64) -> (Option<Complex64>, &'static str) {
    if !n.strictly_positive() || !m.strictly_positive() {
        return (None, "empty-mode");
    }
    match run_approx(u, n, m, seed) {
        ApproxOutcome::Ok(a) if a.diagnostics.cancelled => (Some(a.amplitude.to_complex()), "cancelled"),
        ApproxOutcome::Ok(a) => (Some(a.amplitude.to_complex()), "ok"),
        ApproxOutcome::Coalescing(_) => (None, "coalescing"),
        ApproxOutcome::Failed(CliError::NoSaddles(_)) => (None, "no-saddles"),
        ApproxOutcome::Failed(_) => (None, "error"),
    }
}

/// Every output configuration for a fixed input, one CSV row each.
pub fn cmd_scan(u: &NetworkMatrix, n: &Occupation, method: Method, seed: u64, force: bool) -> Result<Outcome, CliError> {
    let dim = u.dim();
    if n.len() != dim {
        return Err(CliError::Input(format!("matrix has {dim} modes but --in has {}", n.len())));
    }
    let count = count_output_configs(dim, n.total());
    if !force && count.is_none_or(|c| c > SCAN_LIMIT) {
        let shown = count.map_or_else(|| "more than 2^128".to_string(), |c| c.to_string());
        return Err(CliError::Input(format!("{shown} output configurations exceed {SCAN_LIMIT}; pass --force to scan anyway")));
    }
    let configs: Vec<Occupation> = enumerate_output_configs(dim, n.total()).collect();
    let rows: Vec<ScanRow> = configs
        .par_iter()
        .map(|m| {
            let quantum = matches!(method, Method::Exact | Method::Both);
            let approx = matches!(method, Method::Approx | Method::Both);
            let classical = matches!(method, Method::Classical | Method::Both);
            let exact = quantum.then(|| exact_record(u, n, m).0.to_complex());
            let (approx, status) = if approx { approx_status(u, n, m, seed) } else { (None, "") };
            let classical_approx = (method == Method::Both && n.strictly_positive() && m.strictly_positive())
                .then(|| classical_probability_approx(u, n, m).ok())
                .flatten();
            let classical = classical.then(|| classical_probability(u, n, m).ok()).flatten();
            ScanRow { exact, approx, status, classical, classical_approx }
        })
        .collect();

    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    let mut header: Vec<String> = (1..=dim).map(|l| format!("m{l}")).collect();
    header.extend(
        [
            "exact_re",
            "exact_im",
            "exact_probability",
            "approx_re",
            "approx_im",
            "approx_probability",
            "approx_status",
            "classical_probability",
            "classical_approx",
        ]
        .map(String::from),
    );
    out.push_str(&header.join(","));
    out.push('\n');
    for (m, r) in configs.iter().zip(&rows) {
        let mut fields: Vec<String> = m.counts().iter().map(|c| c.to_string()).collect();
        fields.push(cell(r.exact.map(|z| z.re)));
        fields.push(cell(r.exact.map(|z| z.im)));
        fields.push(cell(r.exact.map(|z| z.norm_sqr())));
        fields.push(cell(r.approx.map(|z| z.re)));
        fields.push(cell(r.approx.map(|z| z.im)));
        fields.push(cell(r.approx.map(|z| z.norm_sqr())));
        fields.push(r.status.to_string());
        fields.push(cell(r.classical));
        fields.push(cell(r.classical_approx));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(Outcome::ok(out))
}

/// Deduplicated saddle points with their Hessian determinants.
pub fn cmd_saddles(u: &NetworkMatrix, n: &Occupation, m: &Occupation, starts: usize, seed: u64) -> Result<Outcome, CliError> {
    check_shape(u, n, m)?;
    let problem = ScalingProblem::new(u.clone(), n.clone(), m.clone())?;
    let solutions = solve_all_saddles(&problem, starts, seed)?;
    let contributions = select_contributing(&solutions, n, m)?;
    let saddles: Vec<Value> = contributions
        .iter()
        .map(|c| {
            let s = &c.solution;
            let p: Vec<Vec<Value>> =
                (0..s.p.nrows()).map(|k| (0..s.p.ncols()).map(|l| complex_json(s.p[(k, l)])).collect()).collect();
            json!({
                "x": s.x.iter().map(|&z| complex_json(z)).collect::<Vec<_>>(),
                "y": s.y.iter().map(|&z| complex_json(z)).collect::<Vec<_>>(),
                "p": p,
                "residual": s.residual,
                "det_dprime": complex_json(c.det_dprime),
                "log_abs_term": c.term.log_mag(),
                "contributing": c.contributing,
                "real_type": c.real_type,
                "in_domain": c.in_domain,
            })
        })
        .collect();
    let contributing = contributions.iter().filter(|c| c.contributing).count();
    let out = json!({
        "schema": SCHEMA,
        "n": n,
        "m": m,
        "starts": starts,
        "seed": seed,
        "count": saddles.len(),
        "contributing_count": contributing,
        "saddles": saddles,
    });
    let code = if contributing == 0 { EXIT_NO_SADDLES } else { 0 };
    Ok(Outcome { stdout: to_json(&out), code })
}
