//! Structure-preserving learning of stochastic port-Hamiltonian systems.
//!
//! - [`diffnet`]: tanh MLPs with exact input gradients/Hessians and the
//!   parameter gradients of objectives built from them; Adam.
//! - [`structure`]: coefficient bundles `(H, J, R, σ, g)`, skew/Gram
//!   parameterizations, drift and port output.
//! - [`sde`]: Euler–Maruyama simulation with reproducible per-path noise,
//!   stopped and coupled paths, and the oscillator benchmarks.
//! - [`data`]: transition datasets and increment-based / local-average
//!   velocity targets.
//! - [`training`]: structured models, the IB/CE/NLL objectives, the MLP
//!   baseline and the training loop.
//! - [`diagnostics`]: rollout metrics, passivity residuals, Monte-Carlo
//!   energy balance, the Gronwall stability bound and coupled closeness.
//! - [`pipeline`]: config-driven generate/train/evaluate runs behind the
//!   `sphnn` binary.

// NaN-rejecting `!(x > 0.0)` checks are deliberate; diagnostics take many scalar settings.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod data;
pub mod diagnostics;
pub mod diffnet;
mod error;
pub mod kv;
mod numfmt;
pub mod pipeline;
pub mod sde;
pub mod structure;
pub mod training;

pub use error::{Error, Result};
pub use numfmt::fmt_f64;
