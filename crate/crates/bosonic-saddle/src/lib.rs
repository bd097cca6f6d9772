// Copyright 2026 bosonic-saddle Contributors
// SPDX-License-Identifier: Apache-2.0

//! Boson transition amplitudes in linear unitary networks, computed exactly
//! with a repeated-row Ryser permanent and approximately with saddle points
//! of a complex matrix-scaling problem.

pub mod beamsplitter;
pub mod combinatorics;
pub mod error;
pub mod exact;
pub mod logcomplex;
pub mod network;
pub mod saddle;
pub mod scaling;

pub use beamsplitter::{amplitude_exact_bs, analytic_det, analytic_saddles, classify_regime, BeamSplitterCase, Regime};
pub use error::{Error, Result};
pub use exact::{amplitude_exact, classical_probability, flop_estimate, permanent_naive, permanent_repeated, FlopEstimate};
pub use logcomplex::{relative_error, LogComplex, LogSum};
pub use network::{haar_random_unitary, NetworkMatrix, Occupation};
pub use saddle::{amplitude_approx, amplitude_approx_with, classical_probability_approx, ApproxOptions, Approximation, Diagnostics};
pub use scaling::{solve_all_saddles, SaddleSolution, ScalingProblem};
