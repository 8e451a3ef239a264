//! Pointwise kernel estimation in the heteroscedastic regression model
//! `y_k = S(x_k) + g(x_k, S) ξ_k` on the uniform design `x_k = k/n`.
//!
//! The crate provides the model and its samplers, weak Hölder class
//! certification, the windowed-average estimator with its exact
//! bias/variance decomposition, Monte Carlo and exact (folded-normal) risk
//! evaluation, the least-favourable perturbation machinery used for the
//! lower bound, and the truncation diagnostics for non-Gaussian noise.
//!
//! With the default `parallel` feature, replication loops run on rayon.
//! Results never depend on the execution mode: every replication draws from
//! its own sub-seeded generator and reductions run in replication order.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimator;
pub mod holder;
pub mod lowerbound;
pub mod martingale;
pub mod model;
pub mod par;
pub mod quadrature;
pub mod risk;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use estimator::{DecompositionReport, EstimatorConfig};
pub use holder::{HolderParams, WeakHolderParams};
pub use lowerbound::{MollifierSpec, PerturbationSpec, PlateauKernel};
pub use martingale::TruncationReport;
pub use model::{DesignGrid, FunctionSpec, NoiseKind, NoiseSpec, ScaleSpec};
pub use par::Execution;
pub use risk::{RiskConfig, RiskReport};

/// `E|ξ|/√2` for `ξ ~ N(0,1)`, i.e. `1/√π`: the sharp minimax constant.
pub const EFFICIENCY_CONSTANT: f64 = 0.564_189_583_547_756_3;
