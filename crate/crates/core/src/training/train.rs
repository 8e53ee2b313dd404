use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{baseline_loss_and_grad, loss_and_grad, LossKind};
use super::model::{BaselineModel, ModelSpec, SphnnModel};
use crate::data::{ce_targets, ib_targets, TransitionDataset, VelocityTargets};
use crate::diffnet::{AdamConfig, AdamState, MlpParams};
use crate::error::{Error, Result};
use crate::structure::CoefficientSet;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: LossKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub nll_jitter: f64,
    pub ce_neighbors: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: LossKind::Ib,
            epochs: 2000,
            batch_size: 128,
            lr: 1e-3,
            seed: 0,
            nll_jitter: 1e-6,
            ce_neighbors: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.nll_jitter >= 0.0 && self.nll_jitter.is_finite()) {
            return Err(Error::InvalidParameter(format!("nll_jitter must be >= 0, got {}", self.nll_jitter)));
        }
        if self.ce_neighbors == 0 {
            return Err(Error::InvalidParameter("ce_neighbors must be >= 1".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    /// Mean batch loss of every epoch.
    pub history: Vec<f64>,
}

/// Targets the objective regresses on (`None` for NLL).
pub fn targets_for(ds: &TransitionDataset, cfg: &TrainConfig) -> Result<Option<VelocityTargets>> {
    match cfg.objective {
        LossKind::Ib => ib_targets(ds).map(Some),
        LossKind::Ce => ce_targets(ds, cfg.ce_neighbors.min(ds.len())).map(Some),
        LossKind::Nll => Ok(None),
    }
}

/// Runs shuffled mini-batch Adam over `epochs` passes. Shuffling is the only
/// randomness and is seeded by `seed`.
fn run_epochs<S>(
    n_samples: usize,
    cfg: &TrainConfig,
    mut step: S,
) -> Result<Vec<f64>>
where
    S: FnMut(&[usize]) -> Result<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0x5348_5546);
    let mut order: Vec<usize> = (0..n_samples).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let loss = step(batch).map_err(|e| match e {
                Error::NonFinite { context } => {
                    Error::Numerical(format!("{context} at epoch {epoch}, batch {b}"))
                }
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss at epoch {epoch}, batch {b}")));
            }
            sum += loss * batch.len() as f64;
        }
        history.push(sum / n_samples as f64);
    }
    Ok(history)
}

fn check_grads(grads: &[MlpParams]) -> Result<()> {
    for g in grads {
        g.check_finite("gradient")?;
    }
    Ok(())
}

/// Trains an already-initialized model against precomputed targets.
pub fn train_model(
    ds: &TransitionDataset,
    targets: Option<&VelocityTargets>,
    mut model: SphnnModel,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<SphnnModel>> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidParameter("training needs a non-empty dataset".into()));
    }
    let ids = model.field_ids();
    let mut adam: Vec<AdamState> = model.all_params().iter().map(|p| AdamState::new(p, cfg.adam())).collect();
    let history = run_epochs(ds.len(), cfg, |batch| {
        let (loss, grads) = loss_and_grad(&model, cfg.objective, ds, targets, batch, cfg.nll_jitter)?;
        check_grads(&grads)?;
        for ((id, state), g) in ids.iter().zip(adam.iter_mut()).zip(&grads) {
            let params = model.params_mut(*id).expect("field listed by field_ids");
            state.step(params, g)?;
        }
        Ok(loss)
    })?;
    Ok(TrainOutcome { model, history })
}

/// Initializes a model from `spec` with `cfg.seed` and trains it on `ds`.
pub fn train(
    ds: &TransitionDataset,
    spec: &ModelSpec,
    template: &CoefficientSet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<SphnnModel>> {
    cfg.validate()?;
    let model = SphnnModel::new(spec.clone(), template.clone(), cfg.seed)?;
    let targets = if ds.is_empty() { None } else { targets_for(ds, cfg)? };
    train_model(ds, targets.as_ref(), model, cfg)
}

pub fn baseline_train_model(
    ds: &TransitionDataset,
    targets: &VelocityTargets,
    mut model: BaselineModel,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<BaselineModel>> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidParameter("training needs a non-empty dataset".into()));
    }
    let mut adam = AdamState::new(model.params(), cfg.adam());
    let history = run_epochs(ds.len(), cfg, |batch| {
        let (loss, grad) = baseline_loss_and_grad(&model, ds, targets, batch)?;
        grad.check_finite("gradient")?;
        adam.step(model.params_mut(), &grad)?;
        Ok(loss)
    })?;
    Ok(TrainOutcome { model, history })
}

/// Fits the unstructured baseline to IB targets.
pub fn baseline_train(ds: &TransitionDataset, hidden: &[usize], cfg: &TrainConfig) -> Result<TrainOutcome<BaselineModel>> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidParameter("training needs a non-empty dataset".into()));
    }
    let model = BaselineModel::new(ds.n, hidden, cfg.seed)?;
    let targets = ib_targets(ds)?;
    baseline_train_model(ds, &targets, model, cfg)
}
