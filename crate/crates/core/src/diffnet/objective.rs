use super::mlp::MlpParams;
use crate::error::{Error, Result};

/// A scalar objective over one or more networks.
///
/// Implementations return the objective value and add its gradient with
/// respect to every network's parameters into `grads` (same order as
/// `params`). Objectives may contain input derivatives of the networks;
/// [`super::ScalarField::accumulate_param_grad`] provides the mixed
/// second-order terms those need.
pub trait Objective {
    fn value_and_grad(&self, params: &[&MlpParams], grads: &mut [MlpParams]) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(&[&MlpParams], &mut [MlpParams]) -> Result<f64>,
{
    fn value_and_grad(&self, params: &[&MlpParams], grads: &mut [MlpParams]) -> Result<f64> {
        self(params, grads)
    }
}

/// Objective value and its parameter gradient, one buffer per network.
///
/// Fails if the value or any gradient entry is non-finite; the error names
/// the offending network and layer.
pub fn objective_param_gradient<O: Objective + ?Sized>(
    objective: &O,
    params: &[&MlpParams],
) -> Result<(f64, Vec<MlpParams>)> {
    let mut grads: Vec<MlpParams> = params.iter().map(|p| p.zeros_like()).collect();
    let value = objective.value_and_grad(params, &mut grads)?;
    if !value.is_finite() {
        return Err(Error::non_finite("objective value"));
    }
    for (i, g) in grads.iter().enumerate() {
        g.check_finite(&format!("gradient of network {i}"))?;
    }
    Ok((value, grads))
}
