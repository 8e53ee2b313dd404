use nalgebra::DVector;

use crate::error::{ensure_dim, Error, Result};
use crate::sde::rk4_rollout;

/// States whose norm exceeds this count as a diverged rollout.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Pointwise `H` along a path.
pub fn energy_curve<H>(h: H, states: &[DVector<f64>]) -> Vec<f64>
where
    H: Fn(&DVector<f64>) -> f64,
{
    states.iter().map(h).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutMetrics {
    pub mean_abs_dq: f64,
    pub mean_abs_dp: f64,
    pub mean_abs_dh: f64,
    pub true_mse: f64,
    pub horizon: f64,
    pub dt: f64,
    /// False when the model rollout diverged; the three rollout errors are then infinite.
    pub valid: bool,
}

/// Deterministic rollouts of truth and model from one initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutComparison {
    pub times: Vec<f64>,
    pub truth: Vec<DVector<f64>>,
    /// Model states; shorter than `truth` if the model diverged.
    pub model: Vec<DVector<f64>>,
    pub truth_energy: Vec<f64>,
    pub model_energy: Vec<f64>,
    pub metrics: RolloutMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSettings {
    pub x0: DVector<f64>,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for RolloutSettings {
    fn default() -> Self {
        RolloutSettings {
            x0: DVector::from_vec(vec![1.0, 0.0]),
            horizon: 20.0,
            dt: 0.01,
        }
    }
}

/// Splits a state into position (first half) and momentum (second half).
fn halves(x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let k = x.len() / 2;
    (x.rows(0, k).into_owned(), x.rows(k, x.len() - k).into_owned())
}

/// Compares RK4 rollouts of `model_drift` and `truth_drift` (both noise-free,
/// input already applied) on a common grid.
///
/// Rollout errors are time averages over every grid point of `|Δq|`, `|Δp|`
/// (Euclidean norms of the position/momentum halves) and `|ΔH|` with the
/// ground-truth energy. `true_mse` is the mean of `‖model − truth‖²` over
/// `held_out` states.
pub fn rollout_metrics<M, T, H>(
    model_drift: M,
    truth_drift: T,
    true_h: H,
    held_out: &[DVector<f64>],
    settings: &RolloutSettings,
) -> Result<RolloutComparison>
where
    M: Fn(&DVector<f64>) -> DVector<f64>,
    T: Fn(&DVector<f64>) -> DVector<f64>,
    H: Fn(&DVector<f64>) -> f64,
{
    let n = settings.x0.len();
    ensure_dim("model drift", n, model_drift(&settings.x0).len())?;
    ensure_dim("truth drift", n, truth_drift(&settings.x0).len())?;
    let (truth, truth_ok) = rk4_rollout(&truth_drift, &settings.x0, settings.dt, settings.horizon, DIVERGENCE_NORM)?;
    if !truth_ok {
        return Err(Error::Numerical("reference rollout diverged".into()));
    }
    let (model, model_ok) = rk4_rollout(&model_drift, &settings.x0, settings.dt, settings.horizon, DIVERGENCE_NORM)?;
    let times: Vec<f64> = (0..truth.len()).map(|k| k as f64 * settings.dt).collect();
    let truth_energy = energy_curve(&true_h, &truth);
    let model_energy = energy_curve(&true_h, &model);

    let (mut dq, mut dp, mut dh) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    if model_ok {
        let count = truth.len() as f64;
        let (mut sq, mut sp, mut sh) = (0.0, 0.0, 0.0);
        for k in 0..truth.len() {
            let (qt, pt) = halves(&truth[k]);
            let (qm, pm) = halves(&model[k]);
            sq += (qm - qt).norm();
            sp += (pm - pt).norm();
            sh += (model_energy[k] - truth_energy[k]).abs();
        }
        dq = sq / count;
        dp = sp / count;
        dh = sh / count;
    }

    let mut true_mse = 0.0;
    for x in held_out {
        ensure_dim("held-out state", n, x.len())?;
        true_mse += (model_drift(x) - truth_drift(x)).norm_squared();
    }
    if !held_out.is_empty() {
        true_mse /= held_out.len() as f64;
    }

    Ok(RolloutComparison {
        times,
        truth,
        model,
        truth_energy,
        model_energy,
        metrics: RolloutMetrics {
            mean_abs_dq: dq,
            mean_abs_dp: dp,
            mean_abs_dh: dh,
            true_mse,
            horizon: settings.horizon,
            dt: settings.dt,
            valid: model_ok,
        },
    })
}
