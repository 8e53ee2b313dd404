use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{ensure_dim, Error, Result};
use crate::sde::{simulate_ensemble, step_count, SdeSystem};
use crate::structure::{output, CoefficientSet, CompactBox};

/// `½ Tr(σσᵀ ∇²H) − ∇Hᵀ R ∇H`: the energy rate the generator produces at `x`
/// with zero input.
pub fn passivity_residual(c: &CoefficientSet, x: &DVector<f64>) -> Result<f64> {
    let sigma = c.sigma(x)?;
    let hess = c.hess_h(x)?;
    let grad = c.grad_h(x)?;
    let ito = 0.5 * (&sigma * sigma.transpose()).component_mul(&hess).sum();
    let dissipated = grad.dot(&(c.r(x)? * &grad));
    Ok(ito - dissipated)
}

/// Residual at every grid point of `bx`, in grid order.
pub fn residual_grid(c: &CoefficientSet, bx: &CompactBox) -> Result<Vec<f64>> {
    ensure_dim("residual grid: box dims", c.n(), bx.dim())?;
    bx.grid().par_iter().map(|x| passivity_residual(c, x)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassivityOptions {
    pub n_paths: usize,
    pub master_seed: u64,
    /// Drop the `(c₀ + ε) t` allowance; valid when the residual is negative on the box.
    pub strict: bool,
    /// Approximation tolerance added to `c₀` in the non-strict bound.
    pub epsilon: f64,
}

impl Default for PassivityOptions {
    fn default() -> Self {
        PassivityOptions {
            n_paths: 1000,
            master_seed: 0,
            strict: false,
            epsilon: 0.0,
        }
    }
}

/// Both sides of the stopped energy inequality
/// `𝔼 H(X_{t∧τ}) ≤ H(x₀) + 𝔼∫₀^{t∧τ} uᵀy ds + (c₀ + ε) t` on the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PassivityReport {
    pub grid_residuals: Vec<f64>,
    pub c0_hat: f64,
    pub times: Vec<f64>,
    pub mean_energy: Vec<f64>,
    pub se_energy: Vec<f64>,
    pub supply: Vec<f64>,
    /// Right side minus left side; negative means the inequality is violated.
    pub margin: Vec<f64>,
    pub h0: f64,
    /// `uᵀy + r` at `x₀` and `t = 0`: the exact initial slope of `𝔼 H`.
    pub rate0: f64,
    pub n_paths: usize,
    pub exited: usize,
    pub strict: bool,
    pub epsilon: f64,
}

impl PassivityReport {
    /// Finite-difference energy rate `(𝔼 H(X_{t_k∧τ}) − H(x₀)) / t_k` with its standard error.
    pub fn rate_at(&self, k: usize) -> (f64, f64) {
        let t = self.times[k];
        ((self.mean_energy[k] - self.h0) / t, self.se_energy[k] / t)
    }

    /// Whether `mean_energy ≤ bound + z·se` holds at every grid time.
    pub fn holds_within(&self, z: f64) -> bool {
        self.margin.iter().zip(&self.se_energy).all(|(m, se)| *m >= -z * se)
    }
}

/// Monte-Carlo check of the stopped energy balance for the Itô system whose
/// drift is exactly `(J − R)∇H + g u` and diffusion `σ`.
pub fn weak_passivity_mc<U>(
    c: &CoefficientSet,
    x0: &DVector<f64>,
    u_fn: &U,
    bx: &CompactBox,
    dt: f64,
    horizon: f64,
    opts: &PassivityOptions,
) -> Result<PassivityReport>
where
    U: Fn(f64) -> DVector<f64> + Sync + ?Sized,
{
    ensure_dim("initial state", c.n(), x0.len())?;
    if !bx.contains(x0) {
        return Err(Error::InvalidParameter("initial state lies outside the box".into()));
    }
    if opts.n_paths < 2 {
        return Err(Error::InvalidParameter("weak passivity check needs at least 2 paths".into()));
    }
    let steps = step_count(dt, horizon)?;
    let grid_residuals = residual_grid(c, bx)?;
    let c0_hat = grid_residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let sys = SdeSystem::from_coefficients("passivity", c);
    let x0s = vec![x0.clone(); opts.n_paths];
    let ens = simulate_ensemble(&sys, &x0s, u_fn, dt, horizon, Some(bx), opts.master_seed)?;
    let exited = ens.trajectories.iter().filter(|t| t.exit_time.is_some()).count();
    if steps > 0 && ens.trajectories.iter().all(|t| t.len() == 1) {
        return Err(Error::Numerical("every path left the box in its first step".into()));
    }

    // Per-path energy and accumulated supply on the stopped grid.
    let per_path: Vec<(Vec<f64>, Vec<f64>)> = ens
        .trajectories
        .par_iter()
        .map(|tr| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut energy = Vec::with_capacity(steps + 1);
            let mut supply = Vec::with_capacity(steps + 1);
            let mut acc = 0.0;
            for k in 0..=steps {
                energy.push(c.h(tr.stopped_state(k))?);
                supply.push(acc);
                // Left-point rule; no supply once the path has stopped.
                if k + 1 < tr.len() {
                    let t = k as f64 * dt;
                    let u = u_fn(t);
                    if !u.is_empty() {
                        acc += u.dot(&output(c, &tr.states[k])?) * dt;
                    }
                }
            }
            Ok((energy, supply))
        })
        .collect::<Result<_>>()?;

    let n = opts.n_paths as f64;
    let h0 = c.h(x0)?;
    let y0 = output(c, x0)?;
    let u0 = u_fn(0.0);
    let rate0 = if !u0.is_empty() { u0.dot(&y0) } else { 0.0 } + passivity_residual(c, x0)?;
    let allowance = if opts.strict { 0.0 } else { c0_hat + opts.epsilon };
    let mut times = Vec::with_capacity(steps + 1);
    let mut mean_energy = Vec::with_capacity(steps + 1);
    let mut se_energy = Vec::with_capacity(steps + 1);
    let mut supply = Vec::with_capacity(steps + 1);
    let mut margin = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let mean = per_path.iter().map(|(e, _)| e[k]).sum::<f64>() / n;
        let var = per_path.iter().map(|(e, _)| (e[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let s = per_path.iter().map(|(_, s)| s[k]).sum::<f64>() / n;
        times.push(t);
        mean_energy.push(mean);
        se_energy.push((var / n).sqrt());
        supply.push(s);
        margin.push(h0 + s + allowance * t - mean);
    }
    Ok(PassivityReport {
        grid_residuals,
        c0_hat,
        times,
        mean_energy,
        se_energy,
        supply,
        margin,
        h0,
        rate0,
        n_paths: opts.n_paths,
        exited,
        strict: opts.strict,
        epsilon: opts.epsilon,
    })
}
