// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::saddle::Approximation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not unitary: max |U^H U - I| = {deviation:.3e}")]
    NotUnitary { deviation: f64 },
    #[error("bad dimension: {0}")]
    BadDimension(String),
    #[error("margin mismatch: {0}")]
    MarginMismatch(String),
    #[error("invalid occupation: {0}")]
    InvalidOccupation(String),
    #[error("input too large: {0}")]
    TooLarge(String),
    #[error("every input and output mode needs at least one particle")]
    EmptyMode,
    #[error("a scaling component vanished at mode {0}")]
    ZeroScalingComponent(usize),
    #[error("newton iteration found no root")]
    NoConvergence,
    #[error("degenerate saddle: min |p_kl| = {min_abs_p:.3e}")]
    DegenerateSaddle { min_abs_p: f64 },
    #[error("hessian determinant forms disagree: {first} vs {second}")]
    FormMismatch { first: num_complex::Complex64, second: num_complex::Complex64 },
    #[error("matrix has a non-positive entry at ({0}, {1})")]
    NonPositiveMatrix(usize, usize),
    #[error("network has a vanishing intensity |U_kl|^2 at ({0}, {1})")]
    NonPositiveIntensity(usize, usize),
    #[error("coalescing saddle points: measure {:.3e} below threshold", .0.diagnostics.coalescence_measure)]
    CoalescingSaddles(Box<Approximation>),
    #[error("no contributing saddle point found")]
    NoSaddlesFound,
}

pub type Result<T> = std::result::Result<T, Error>;
