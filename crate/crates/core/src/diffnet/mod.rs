//! Tanh multilayer perceptrons with exact input derivatives up to second
//! order, parameter gradients of objectives built from those derivatives,
//! and the Adam optimizer.
//!
//! Derivatives are derived by hand for the fixed MLP form: a reverse pass
//! for input gradients, forward-over-reverse for Hessian-vector products,
//! and reverse-over-forward for parameter gradients of directional
//! derivatives.

mod adam;
mod field;
mod mlp;
mod objective;
pub mod persist;

pub use adam::{AdamConfig, AdamState};
pub use field::{MatrixField, ScalarField, VectorField};
pub use mlp::{Activation, Architecture, MlpParams, Tangent, Trace};
pub use objective::{objective_param_gradient, Objective};
