use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{ensure_dim, Error, Result};
use crate::sde::{simulate_coupled, SdeSystem, Seeds};
use crate::structure::{coefficient_distance, CoefficientDistance, CoefficientSet, CompactBox};

/// Multiplier applied to the grid Lipschitz estimate, which can only under-estimate.
pub const LIPSCHITZ_SAFETY: f64 = 1.5;
/// Pairs of grid points up to this many grid steps apart enter the Lipschitz estimate.
pub const LIPSCHITZ_RADIUS_STEPS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `sup ‖b(x) − b̂(x)‖` over the box grid, zero input.
    pub alpha: f64,
    /// `sup ‖σ(x) − σ̂(x)‖_F` over the box grid.
    pub beta: f64,
    /// Largest difference quotient of the true drift and diffusion over nearby grid pairs.
    pub l_hat: f64,
    /// `(4T² + 16T) exp((4T + 16) L² T) (α + β)²` with `L = 1.5 L̂`.
    pub analytic_bound: f64,
    /// Mean over coupled paths of `sup_{t ≤ T∧τ} ‖X_t − X̂_t‖²`.
    pub empirical_f_t: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub exited: usize,
}

impl StabilityReport {
    pub fn holds(&self) -> bool {
        self.empirical_f_t <= self.analytic_bound
    }
}

/// The Gronwall-type bound on the mean squared sup-gap of coupled stopped paths.
pub fn gronwall_bound(horizon: f64, lipschitz: f64, alpha: f64, beta: f64) -> f64 {
    let t = horizon;
    let ab = alpha + beta;
    if ab == 0.0 {
        return 0.0;
    }
    (4.0 * t * t + 16.0 * t) * ((4.0 * t + 16.0) * lipschitz * lipschitz * t).exp() * ab * ab
}

/// Integer offsets of grid neighbours within the Lipschitz radius, excluding zero.
fn neighbour_offsets(bx: &CompactBox) -> Vec<Vec<i64>> {
    let n = bx.dim();
    let r = LIPSCHITZ_RADIUS_STEPS as i64;
    let max_step = (0..n).map(|a| bx.step(a)).fold(0.0, f64::max);
    let radius = LIPSCHITZ_RADIUS_STEPS * max_step * (1.0 + 1e-12);
    let mut out = Vec::new();
    let mut cur = vec![-r; n];
    loop {
        let dist: f64 = cur
            .iter()
            .enumerate()
            .map(|(a, &o)| (o as f64 * bx.step(a)).powi(2))
            .sum::<f64>()
            .sqrt();
        if cur.iter().any(|&o| o != 0) && dist <= radius {
            out.push(cur.clone());
        }
        let mut axis = 0;
        loop {
            if axis == n {
                return out;
            }
            cur[axis] += 1;
            if cur[axis] > r {
                cur[axis] = -r;
                axis += 1;
            } else {
                break;
            }
        }
    }
}

/// Max over nearby grid pairs of `max(‖Δb‖, ‖Δσ‖_F) / ‖Δx‖` for the system at zero input.
pub fn lipschitz_estimate(sys: &SdeSystem, bx: &CompactBox) -> Result<f64> {
    ensure_dim("lipschitz estimate: box dims", sys.n(), bx.dim())?;
    let n = bx.dim();
    let pts = bx.grid_points_per_axis;
    if pts < 2 {
        return Err(Error::InvalidParameter("Lipschitz estimate needs >= 2 grid points per axis".into()));
    }
    let grid = bx.grid();
    let u0 = DVector::zeros(sys.m());
    let values: Vec<(DVector<f64>, nalgebra::DMatrix<f64>)> = grid
        .par_iter()
        .map(|x| Ok((sys.drift_at(0.0, x, &u0)?, sys.diffusion_at(x)?)))
        .collect::<Result<_>>()?;
    let offsets = neighbour_offsets(bx);
    // Grid order has the last axis varying fastest.
    let index_of = |multi: &[i64]| -> usize { multi.iter().fold(0usize, |acc, &i| acc * pts + i as usize) };
    let l = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let mut multi = vec![0i64; n];
            let mut rest = flat;
            for a in (0..n).rev() {
                multi[a] = (rest % pts) as i64;
                rest /= pts;
            }
            let mut best = 0.0f64;
            for off in &offsets {
                let other: Vec<i64> = multi.iter().zip(off).map(|(m, o)| m + o).collect();
                if other.iter().any(|&i| i < 0 || i >= pts as i64) {
                    continue;
                }
                let j = index_of(&other);
                let dx = (&grid[flat] - &grid[j]).norm();
                let db = (&values[flat].0 - &values[j].0).norm() / dx;
                let ds = (&values[flat].1 - &values[j].1).norm() / dx;
                best = best.max(db).max(ds);
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    if !l.is_finite() {
        return Err(Error::Numerical("Lipschitz estimate is not finite; refine the grid".into()));
    }
    Ok(l)
}

/// Sup gaps between drifts (zero input) and diffusions over the box grid.
pub fn coefficient_gaps(truth: &SdeSystem, learned: &SdeSystem, bx: &CompactBox) -> Result<(f64, f64)> {
    ensure_dim("stability: state dims", truth.n(), learned.n())?;
    ensure_dim("stability: noise dims", truth.d(), learned.d())?;
    ensure_dim("stability: box dims", truth.n(), bx.dim())?;
    let u0 = DVector::zeros(truth.m());
    let u0l = DVector::zeros(learned.m());
    let gaps: Vec<(f64, f64)> = bx
        .grid()
        .par_iter()
        .map(|x| {
            let a = (truth.drift_at(0.0, x, &u0)? - learned.drift_at(0.0, x, &u0l)?).norm();
            let b = (truth.diffusion_at(x)? - learned.diffusion_at(x)?).norm();
            Ok((a, b))
        })
        .collect::<Result<_>>()?;
    Ok(gaps.iter().fold((0.0f64, 0.0f64), |(a, b), &(x, y)| (a.max(x), b.max(y))))
}

/// Per-path `sup_{t ≤ T∧τ} ‖X_t − X̂_t‖` of coupled stopped pairs, and how many pairs exited.
pub fn coupled_sup_gaps<U>(
    truth: &SdeSystem,
    learned: &SdeSystem,
    x0: &DVector<f64>,
    u_fn: &U,
    bx: &CompactBox,
    dt: f64,
    horizon: f64,
    n_paths: usize,
    master_seed: u64,
) -> Result<(Vec<f64>, usize)>
where
    U: Fn(f64) -> DVector<f64> + Sync + ?Sized,
{
    let runs: Vec<(f64, bool)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let (a, b, exit) = simulate_coupled(truth, learned, x0, u_fn, dt, horizon, Some(bx), Seeds::new(master_seed, i))?;
            let sup = a.states.iter().zip(&b.states).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            Ok((sup, exit.is_some()))
        })
        .collect::<Result<_>>()?;
    let exited = runs.iter().filter(|r| r.1).count();
    Ok((runs.into_iter().map(|r| r.0).collect(), exited))
}

/// Compares the empirical mean squared sup-gap of coupled paths with the
/// analytic bound built from the coefficient gaps and the truth's Lipschitz estimate.
pub fn stability_bound_check<U>(
    truth: &SdeSystem,
    learned: &SdeSystem,
    bx: &CompactBox,
    x0: &DVector<f64>,
    u_fn: &U,
    dt: f64,
    horizon: f64,
    n_paths: usize,
    master_seed: u64,
) -> Result<StabilityReport>
where
    U: Fn(f64) -> DVector<f64> + Sync + ?Sized,
{
    if n_paths == 0 {
        return Err(Error::InvalidParameter("stability check needs at least one path".into()));
    }
    let (alpha, beta) = coefficient_gaps(truth, learned, bx)?;
    let l_hat = lipschitz_estimate(truth, bx)?;
    let analytic_bound = gronwall_bound(horizon, LIPSCHITZ_SAFETY * l_hat, alpha, beta);
    let (sups, exited) = coupled_sup_gaps(truth, learned, x0, u_fn, bx, dt, horizon, n_paths, master_seed)?;
    let empirical_f_t = sups.iter().map(|s| s * s).sum::<f64>() / n_paths as f64;
    Ok(StabilityReport {
        alpha,
        beta,
        l_hat,
        analytic_bound,
        empirical_f_t,
        horizon,
        n_paths,
        exited,
    })
}

/// Coefficient distance plus quantiles of the coupled sup-distance.
#[derive(Debug, Clone, PartialEq)]
pub struct UatReport {
    pub distance: CoefficientDistance,
    /// 50 %, 90 % and 99 % quantiles of `sup_{t ≤ T∧τ} ‖X_t − X̂_t‖`.
    pub sup_quantiles: [f64; 3],
    pub n_paths: usize,
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn uat_report(
    truth: &CoefficientSet,
    learned: &CoefficientSet,
    bx: &CompactBox,
    x0: &DVector<f64>,
    dt: f64,
    horizon: f64,
    n_paths: usize,
    master_seed: u64,
) -> Result<UatReport> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("uat report needs at least one path".into()));
    }
    let distance = coefficient_distance(truth, learned, bx)?;
    let a = SdeSystem::from_coefficients("truth", truth);
    let b = SdeSystem::from_coefficients("learned", learned);
    let m = truth.m();
    let u_fn = move |_: f64| DVector::zeros(m);
    let (mut sups, _) = coupled_sup_gaps(&a, &b, x0, &u_fn, bx, dt, horizon, n_paths, master_seed)?;
    sups.sort_by(f64::total_cmp);
    Ok(UatReport {
        distance,
        sup_quantiles: [quantile(&sups, 0.5), quantile(&sups, 0.9), quantile(&sups, 0.99)],
        n_paths,
    })
}
