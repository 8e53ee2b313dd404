//! Structured SPH-NN models, the IB/CE/NLL objectives, the unstructured
//! baseline and the Adam training loop.

mod loss;
mod model;
pub mod persist;
mod train;

pub use loss::{
    baseline_loss, baseline_loss_and_grad, loss_and_grad, loss_ce, loss_ib, loss_nll, LossKind,
};
pub use model::{BaselineModel, FieldId, HSource, JSource, ModelSpec, RSource, SigmaSource, SphnnModel};
pub use train::{
    baseline_train, baseline_train_model, targets_for, train, train_model, TrainConfig, TrainOutcome,
};
