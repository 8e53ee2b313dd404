use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::model::{BaselineModel, SphnnModel};
use crate::data::{TargetKind, TransitionDataset, VelocityTargets};
use crate::diffnet::MlpParams;
use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Squared error against increment-based targets.
    Ib,
    /// Squared error against locally averaged targets.
    Ce,
    /// Gaussian negative log-likelihood of the increments.
    Nll,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Ib => "ib",
            LossKind::Ce => "ce",
            LossKind::Nll => "nll",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ib" => Ok(LossKind::Ib),
            "ce" => Ok(LossKind::Ce),
            "nll" => Ok(LossKind::Nll),
            other => Err(Error::InvalidParameter(format!("unknown objective `{other}` (expected ib, ce or nll)"))),
        }
    }
}

fn check_targets(ds: &TransitionDataset, targets: &VelocityTargets) -> Result<()> {
    ensure_dim("targets vs transitions", ds.len(), targets.len())?;
    if let Some(t) = targets.targets.first() {
        ensure_dim("target length", ds.n, t.len())?;
    }
    Ok(())
}

fn check_indices(ds: &TransitionDataset, idx: &[usize]) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::InvalidParameter("loss over an empty batch".into()));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= ds.len()) {
        return Err(Error::InvalidParameter(format!("batch index {bad} out of range for {} transitions", ds.len())));
    }
    Ok(())
}

/// Batch-mean loss over `idx` and its gradient for every learned field of
/// the model (in [`SphnnModel::field_ids`] order).
///
/// `targets` is required for IB/CE; `jitter` is only used by NLL.
pub fn loss_and_grad(
    model: &SphnnModel,
    kind: LossKind,
    ds: &TransitionDataset,
    targets: Option<&VelocityTargets>,
    idx: &[usize],
    jitter: f64,
) -> Result<(f64, Vec<MlpParams>)> {
    check_indices(ds, idx)?;
    ensure_dim("dataset state dim vs model", model.n(), ds.n)?;
    ensure_dim("dataset input dim vs model", model.m(), ds.m)?;
    let mut grads = model.zero_grads();
    let scale = 1.0 / idx.len() as f64;
    let mut total = 0.0;
    match kind {
        LossKind::Ib | LossKind::Ce => {
            let targets = targets.ok_or_else(|| Error::InvalidParameter(format!("{kind} loss needs velocity targets")))?;
            check_targets(ds, targets)?;
            for &i in idx {
                let tr = &ds.transitions[i];
                let ev = model.eval(&tr.x)?;
                let e = &targets.targets[i] - ev.drift(&tr.u);
                total += e.norm_squared();
                let c_f = e * (-2.0 * scale);
                model.backprop_drift(&ev, &c_f, &mut grads)?;
            }
        }
        LossKind::Nll => {
            if !(jitter >= 0.0) {
                return Err(Error::InvalidParameter(format!("nll jitter must be >= 0, got {jitter}")));
            }
            let dt = ds.dt;
            let n = ds.n;
            let log_2pi = (2.0 * std::f64::consts::PI).ln();
            for &i in idx {
                let tr = &ds.transitions[i];
                let ev = model.eval(&tr.x)?;
                let resid = (&tr.x_next - &tr.x) - ev.drift(&tr.u) * dt;
                let (s_trace, s) = model.sigma_traced(&tr.x)?;
                let cov = &s * s.transpose() * dt + DMatrix::identity(n, n) * jitter;
                let chol = cov.cholesky().ok_or_else(|| {
                    Error::Numerical(format!("increment covariance not positive definite at transition {i}"))
                })?;
                let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                let w = chol.solve(&resid);
                total += 0.5 * (n as f64 * log_2pi + logdet) + 0.5 * resid.dot(&w);
                let c_f = &w * (-dt * scale);
                model.backprop_drift(&ev, &c_f, &mut grads)?;
                if let Some(trace) = s_trace {
                    let inv = chol.inverse();
                    let g_cov = (inv - &w * w.transpose()) * (0.5 * scale);
                    let adj = g_cov * &s * (2.0 * dt);
                    model.backprop_sigma(&trace, &adj, &mut grads)?;
                }
            }
        }
    }
    Ok((total * scale, grads))
}

fn all_indices(ds: &TransitionDataset) -> Vec<usize> {
    (0..ds.len()).collect()
}

/// Mean squared IB regression error over the whole dataset.
pub fn loss_ib(model: &SphnnModel, ds: &TransitionDataset, targets: &VelocityTargets) -> Result<f64> {
    if targets.kind != TargetKind::Ib {
        return Err(Error::InvalidParameter("loss_ib needs IB targets".into()));
    }
    Ok(loss_and_grad(model, LossKind::Ib, ds, Some(targets), &all_indices(ds), 0.0)?.0)
}

/// Mean squared CE regression error over the whole dataset.
pub fn loss_ce(model: &SphnnModel, ds: &TransitionDataset, targets: &VelocityTargets) -> Result<f64> {
    if targets.kind != TargetKind::Ce {
        return Err(Error::InvalidParameter("loss_ce needs CE targets".into()));
    }
    Ok(loss_and_grad(model, LossKind::Ce, ds, Some(targets), &all_indices(ds), 0.0)?.0)
}

/// Mean Gaussian negative log-likelihood of the increments, covariance
/// `σ̂σ̂ᵀΔt + jitter·I`.
pub fn loss_nll(model: &SphnnModel, ds: &TransitionDataset, jitter: f64) -> Result<f64> {
    Ok(loss_and_grad(model, LossKind::Nll, ds, None, &all_indices(ds), jitter)?.0)
}

/// Batch-mean squared error of the baseline against `targets`, with its gradient.
pub fn baseline_loss_and_grad(
    model: &BaselineModel,
    ds: &TransitionDataset,
    targets: &VelocityTargets,
    idx: &[usize],
) -> Result<(f64, MlpParams)> {
    check_indices(ds, idx)?;
    check_targets(ds, targets)?;
    ensure_dim("dataset state dim vs baseline", model.n(), ds.n)?;
    let params = model.params();
    let mut grad = params.zeros_like();
    let scale = 1.0 / idx.len() as f64;
    let mut total = 0.0;
    for &i in idx {
        let trace = params.trace(ds.transitions[i].x.as_slice())?;
        let e = &targets.targets[i] - DVector::from_column_slice(trace.output());
        total += e.norm_squared();
        let adj: Vec<f64> = e.iter().map(|v| -2.0 * scale * v).collect();
        params.param_vjp(&trace, &adj, &mut grad)?;
    }
    Ok((total * scale, grad))
}

pub fn baseline_loss(model: &BaselineModel, ds: &TransitionDataset, targets: &VelocityTargets) -> Result<f64> {
    Ok(baseline_loss_and_grad(model, ds, targets, &all_indices(ds))?.0)
}
