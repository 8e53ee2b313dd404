use super::mlp::MlpParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step_count: u64,
    first_moment: MlpParams,
    second_moment: MlpParams,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        AdamState {
            config,
            step_count: 0,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &MlpParams {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &MlpParams {
        &self.second_moment
    }

    pub fn step(&mut self, params: &mut MlpParams, grad: &MlpParams) -> Result<()> {
        if !params.same_shape(grad) || !params.same_shape(&self.first_moment) {
            return Err(Error::InvalidParameter(
                "adam: parameter, gradient and moment shapes differ".into(),
            ));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let m = self.first_moment.as_mut_slice();
        let v = self.second_moment.as_mut_slice();
        for (((p, &g), mi), vi) in params
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = beta1 * *mi + (1.0 - beta1) * g;
            *vi = beta2 * *vi + (1.0 - beta2) * g * g;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
