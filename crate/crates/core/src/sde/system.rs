use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::noise::NoiseStream;
use crate::error::{ensure_dim, Error, Result};
use crate::structure::{self, CoefficientSet, CompactBox};

pub type DriftFn = Arc<dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type DiffusionFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// An Itô SDE `dX = b(t, X, u) dt + σ(X) dW` with state dim `n`, noise dim
/// `d` and input dim `m`.
#[derive(Clone)]
pub struct SdeSystem {
    pub name: String,
    n: usize,
    d: usize,
    m: usize,
    drift: DriftFn,
    diffusion: DiffusionFn,
    coefficients: Option<CoefficientSet>,
}

impl fmt::Debug for SdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeSystem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("d", &self.d)
            .field("m", &self.m)
            .finish()
    }
}

impl SdeSystem {
    pub fn new(name: impl Into<String>, n: usize, d: usize, m: usize, drift: DriftFn, diffusion: DiffusionFn) -> Self {
        SdeSystem {
            name: name.into(),
            n,
            d,
            m,
            drift,
            diffusion,
            coefficients: None,
        }
    }

    /// Drift `(J − R)∇H + g u`, diffusion `σ`.
    pub fn from_coefficients(name: impl Into<String>, c: &CoefficientSet) -> Self {
        let cd = c.clone();
        let cs = c.clone();
        SdeSystem {
            name: name.into(),
            n: c.n(),
            d: c.d(),
            m: c.m(),
            drift: Arc::new(move |_, x, u| structure::drift(&cd, x, u).expect("dims checked by integrator")),
            diffusion: Arc::new(move |x| cs.sigma(x).expect("dims checked by integrator")),
            coefficients: Some(c.clone()),
        }
    }

    pub fn with_coefficients(mut self, c: CoefficientSet) -> Self {
        self.coefficients = Some(c);
        self
    }

    /// Same drift, zero diffusion.
    pub fn noise_free(&self) -> Self {
        let (n, d) = (self.n, self.d);
        SdeSystem {
            name: format!("{}-noise-free", self.name),
            diffusion: Arc::new(move |_| DMatrix::zeros(n, d)),
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coefficients(&self) -> Option<&CoefficientSet> {
        self.coefficients.as_ref()
    }

    pub fn drift_at(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("state", self.n, x.len())?;
        ensure_dim("input", self.m, u.len())?;
        Ok((self.drift)(t, x, u))
    }

    pub fn diffusion_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        ensure_dim("state", self.n, x.len())?;
        Ok((self.diffusion)(x))
    }
}

/// Identifies the noise stream of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seeds {
    pub master_seed: u64,
    pub path_index: u64,
}

impl Seeds {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        Seeds {
            master_seed,
            path_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub master_seed: u64,
    pub path_index: u64,
    /// First grid time the state left the governing box. States are only
    /// recorded strictly before it.
    pub exit_time: Option<f64>,
    /// The first out-of-box state, kept for diagnosis.
    pub exit_state: Option<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectories hold at least the initial state")
    }

    /// State of the stopped process at grid index `k`: frozen at the last
    /// recorded (in-box) state once the path has exited.
    pub fn stopped_state(&self, k: usize) -> &DVector<f64> {
        &self.states[k.min(self.states.len() - 1)]
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }
}

/// A set of paths over a common grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ensemble {
    pub trajectories: Vec<Trajectory>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// Number of steps `N` with `N·dt = horizon`.
pub fn step_count(dt: f64, horizon: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be >= 0, got {horizon}")));
    }
    let steps = (horizon / dt).round();
    if (steps * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} is not an integer multiple of dt {dt}"
        )));
    }
    Ok(steps as usize)
}

/// One Euler–Maruyama step `x + b dt + σ(x) √dt z`.
pub fn em_step(
    sys: &SdeSystem,
    t: f64,
    x: &DVector<f64>,
    u: &DVector<f64>,
    dt: f64,
    z: &DVector<f64>,
) -> Result<DVector<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    ensure_dim("normal draw", sys.d, z.len())?;
    let b = sys.drift_at(t, x, u)?;
    let mut next = x + b * dt;
    if sys.d > 0 {
        next += sys.diffusion_at(x)? * z * dt.sqrt();
    }
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite(format!(
            "Euler-Maruyama step at t={t}, x={:?}",
            x.as_slice()
        )));
    }
    Ok(next)
}

fn grid_time(k: usize, dt: f64) -> f64 {
    k as f64 * dt
}

fn run<U>(
    sys: &SdeSystem,
    x0: &DVector<f64>,
    u_fn: &U,
    dt: f64,
    horizon: f64,
    seeds: Seeds,
    bx: Option<&CompactBox>,
) -> Result<Trajectory>
where
    U: Fn(f64) -> DVector<f64> + ?Sized,
{
    ensure_dim("initial state", sys.n, x0.len())?;
    let steps = step_count(dt, horizon)?;
    if let Some(b) = bx {
        ensure_dim("box", sys.n, b.dim())?;
        if !b.contains(x0) {
            return Err(Error::InvalidParameter("initial state lies outside the box".into()));
        }
    }
    let mut noise = NoiseStream::new(seeds.master_seed, seeds.path_index);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0.clone());
    let mut z = DVector::zeros(sys.d);
    let mut exit_time = None;
    let mut exit_state = None;
    for k in 0..steps {
        let t = grid_time(k, dt);
        noise.fill_normal(z.as_mut_slice());
        let u = u_fn(t);
        let next = em_step(sys, t, &states[k], &u, dt, &z)
            .map_err(|e| Error::Numerical(format!("step {k}: {e}")))?;
        if let Some(b) = bx {
            if !b.contains(&next) {
                exit_time = Some(grid_time(k + 1, dt));
                exit_state = Some(next);
                break;
            }
        }
        times.push(grid_time(k + 1, dt));
        states.push(next);
    }
    Ok(Trajectory {
        dt,
        times,
        states,
        master_seed: seeds.master_seed,
        path_index: seeds.path_index,
        exit_time,
        exit_state,
    })
}

/// Euler–Maruyama path on `[0, horizon]`.
pub fn simulate<U>(sys: &SdeSystem, x0: &DVector<f64>, u_fn: &U, dt: f64, horizon: f64, seeds: Seeds) -> Result<Trajectory>
where
    U: Fn(f64) -> DVector<f64> + ?Sized,
{
    run(sys, x0, u_fn, dt, horizon, seeds, None)
}

/// Like [`simulate`] but halts at the first grid time the state leaves `bx`
/// (a closed box).
pub fn simulate_stopped<U>(
    sys: &SdeSystem,
    x0: &DVector<f64>,
    u_fn: &U,
    dt: f64,
    horizon: f64,
    bx: &CompactBox,
    seeds: Seeds,
) -> Result<Trajectory>
where
    U: Fn(f64) -> DVector<f64> + ?Sized,
{
    run(sys, x0, u_fn, dt, horizon, seeds, Some(bx))
}

/// Two systems driven by the same Brownian increments, stopped together at
/// the first grid time either leaves `bx`.
pub fn simulate_coupled<U>(
    sys_a: &SdeSystem,
    sys_b: &SdeSystem,
    x0: &DVector<f64>,
    u_fn: &U,
    dt: f64,
    horizon: f64,
    bx: Option<&CompactBox>,
    seeds: Seeds,
) -> Result<(Trajectory, Trajectory, Option<f64>)>
where
    U: Fn(f64) -> DVector<f64> + ?Sized,
{
    ensure_dim("coupled systems: state dims", sys_a.n, sys_b.n)?;
    ensure_dim("coupled systems: noise dims", sys_a.d, sys_b.d)?;
    ensure_dim("initial state", sys_a.n, x0.len())?;
    let steps = step_count(dt, horizon)?;
    if let Some(b) = bx {
        ensure_dim("box", sys_a.n, b.dim())?;
        if !b.contains(x0) {
            return Err(Error::InvalidParameter("initial state lies outside the box".into()));
        }
    }
    let mut noise = NoiseStream::new(seeds.master_seed, seeds.path_index);
    let mut times = vec![0.0];
    let mut xa = vec![x0.clone()];
    let mut xb = vec![x0.clone()];
    let mut z = DVector::zeros(sys_a.d);
    let mut joint_exit = None;
    let mut exit_a = None;
    let mut exit_b = None;
    for k in 0..steps {
        let t = grid_time(k, dt);
        noise.fill_normal(z.as_mut_slice());
        let u = u_fn(t);
        let na = em_step(sys_a, t, &xa[k], &u, dt, &z).map_err(|e| Error::Numerical(format!("step {k}: {e}")))?;
        let nb = em_step(sys_b, t, &xb[k], &u, dt, &z).map_err(|e| Error::Numerical(format!("step {k}: {e}")))?;
        if let Some(b) = bx {
            if !b.contains(&na) || !b.contains(&nb) {
                joint_exit = Some(grid_time(k + 1, dt));
                exit_a = Some(na);
                exit_b = Some(nb);
                break;
            }
        }
        times.push(grid_time(k + 1, dt));
        xa.push(na);
        xb.push(nb);
    }
    let make = |states, exit_state| Trajectory {
        dt,
        times: times.clone(),
        states,
        master_seed: seeds.master_seed,
        path_index: seeds.path_index,
        exit_time: joint_exit,
        exit_state,
    };
    Ok((make(xa, exit_a), make(xb, exit_b), joint_exit))
}

/// Paths `0..x0s.len()` from the given initial states, optionally stopped.
/// Path `i` uses noise stream `(master_seed, i)`; results are in path order.
pub fn simulate_ensemble<U>(
    sys: &SdeSystem,
    x0s: &[DVector<f64>],
    u_fn: &U,
    dt: f64,
    horizon: f64,
    bx: Option<&CompactBox>,
    master_seed: u64,
) -> Result<Ensemble>
where
    U: Fn(f64) -> DVector<f64> + Sync + ?Sized,
{
    let trajectories = x0s
        .par_iter()
        .enumerate()
        .map(|(i, x0)| run(sys, x0, u_fn, dt, horizon, Seeds::new(master_seed, i as u64), bx))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { trajectories })
}

/// Zero input of dimension `m`.
pub fn zero_input(m: usize) -> impl Fn(f64) -> DVector<f64> + Sync {
    move |_| DVector::zeros(m)
}

/// Classical fourth-order Runge–Kutta rollout of `ẋ = f(x)`, used for the
/// noise-free evaluation rollouts where explicit Euler's energy drift would
/// swamp the quantities being measured.
///
/// Stops early (returning the partial path and `false`) once the state is
/// non-finite or its norm exceeds `divergence_norm`.
pub fn rk4_rollout<F>(f: F, x0: &DVector<f64>, dt: f64, horizon: f64, divergence_norm: f64) -> Result<(Vec<DVector<f64>>, bool)>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let steps = step_count(dt, horizon)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.clone());
    for _ in 0..steps {
        let x = states.last().unwrap();
        let k1 = f(x);
        let k2 = f(&(x + &k1 * (0.5 * dt)));
        let k3 = f(&(x + &k2 * (0.5 * dt)));
        let k4 = f(&(x + &k3 * dt));
        let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if next.iter().any(|v| !v.is_finite()) || next.norm() > divergence_norm {
            return Ok((states, false));
        }
        states.push(next);
    }
    Ok((states, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn linear(name: &str, a: f64, sigma: f64) -> SdeSystem {
        SdeSystem::new(
            name,
            1,
            1,
            0,
            Arc::new(move |_, x, _| x * a),
            Arc::new(move |_| DMatrix::from_element(1, 1, sigma)),
        )
    }

    #[test]
    fn em_step_examples() {
        let none = DVector::zeros(0);
        let still = linear("still", 0.0, 0.0);
        let x = dvector![0.7];
        assert_eq!(em_step(&still, 0.0, &x, &none, 0.1, &dvector![1.3]).unwrap(), x);

        let decay = linear("decay", -1.0, 0.0);
        assert_abs_diff_eq!(em_step(&decay, 0.0, &dvector![1.0], &none, 0.1, &dvector![0.0]).unwrap()[0], 0.9, epsilon = 1e-15);

        let bm = SdeSystem::new(
            "bm",
            3,
            3,
            0,
            Arc::new(|_, _, _| DVector::zeros(3)),
            Arc::new(|_| DMatrix::identity(3, 3)),
        );
        let x = dvector![1.0, -2.0, 0.5];
        let next = em_step(&bm, 0.0, &x, &none, 0.04, &DVector::from_element(3, 1.0)).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(next[i], x[i] + 0.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn em_step_reports_blow_up() {
        let boom = linear("boom", f64::MAX, 0.0);
        let err = em_step(&boom, 0.5, &dvector![10.0], &DVector::zeros(0), 1.0, &dvector![0.0]).unwrap_err();
        assert!(err.to_string().contains("t=0.5"));
    }

    #[test]
    fn zero_horizon_returns_initial_state() {
        let sys = linear("ou", -1.0, 0.3);
        let tr = simulate(&sys, &dvector![2.0], &zero_input(0), 0.1, 0.0, Seeds::new(1, 0)).unwrap();
        assert_eq!(tr.states, vec![dvector![2.0]]);
        assert_eq!(tr.times, vec![0.0]);
    }

    #[test]
    fn horizon_must_be_multiple_of_dt() {
        assert!(step_count(0.3, 1.0).is_err());
        assert_eq!(step_count(0.01, 0.1).unwrap(), 10);
        assert_eq!(step_count(1e-3, 20.0).unwrap(), 20_000);
    }

    #[test]
    fn simulation_is_deterministic_per_seed() {
        let sys = linear("ou", -1.0, 0.3);
        let a = simulate(&sys, &dvector![1.0], &zero_input(0), 0.01, 1.0, Seeds::new(42, 3)).unwrap();
        let b = simulate(&sys, &dvector![1.0], &zero_input(0), 0.01, 1.0, Seeds::new(42, 3)).unwrap();
        let c = simulate(&sys, &dvector![1.0], &zero_input(0), 0.01, 1.0, Seeds::new(42, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.states, c.states);
        assert_eq!(a.times.len(), 101);
        assert_eq!(a.times[37], 37.0 * 0.01);
    }

    #[test]
    fn explosive_path_exits_at_hand_iterated_step() {
        let sys = linear("grow", 1.0, 0.0);
        let bx = CompactBox::new(dvector![-2.0], dvector![2.0], 3).unwrap();
        let tr = simulate_stopped(&sys, &dvector![1.0], &zero_input(0), 0.1, 2.0, &bx, Seeds::new(0, 0)).unwrap();
        // 1.1^7 = 1.9487 inside, 1.1^8 = 2.1436 outside
        assert_abs_diff_eq!(tr.exit_time.unwrap(), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(tr.exit_state.as_ref().unwrap()[0], 1.1f64.powi(8), epsilon = 1e-12);
        assert_abs_diff_eq!(tr.exit_state.as_ref().unwrap()[0], 2.1436, epsilon = 1e-4);
        assert_eq!(tr.len(), 8);
        assert!(tr.states.iter().all(|s| bx.contains(s)));
        assert_eq!(tr.stopped_state(15), tr.last_state());
    }

    #[test]
    fn boundary_start_is_inside_and_large_box_changes_nothing() {
        let sys = linear("ou", -1.0, 0.2);
        let bx = CompactBox::new(dvector![-1.0], dvector![1.0], 3).unwrap();
        let tr = simulate_stopped(&sys, &dvector![1.0], &zero_input(0), 0.01, 0.01, &bx, Seeds::new(5, 0));
        assert!(tr.is_ok());

        let huge = CompactBox::new(dvector![-1e6], dvector![1e6], 3).unwrap();
        let stopped = simulate_stopped(&sys, &dvector![0.5], &zero_input(0), 0.01, 2.0, &huge, Seeds::new(5, 1)).unwrap();
        let free = simulate(&sys, &dvector![0.5], &zero_input(0), 0.01, 2.0, Seeds::new(5, 1)).unwrap();
        assert_eq!(stopped, free);
        assert!(stopped.exit_time.is_none());
    }

    #[test]
    fn coupled_identical_systems_coincide() {
        let sys = linear("ou", -1.0, 0.5);
        let (a, b, exit) = simulate_coupled(&sys, &sys, &dvector![0.3], &zero_input(0), 0.01, 1.0, None, Seeds::new(9, 2)).unwrap();
        assert_eq!(a.states, b.states);
        assert!(exit.is_none());
        // Same noise as a solo run of the same stream.
        let solo = simulate(&sys, &dvector![0.3], &zero_input(0), 0.01, 1.0, Seeds::new(9, 2)).unwrap();
        assert_eq!(solo.states, a.states);
    }

    #[test]
    fn coupled_constant_drift_gap_grows_linearly() {
        let delta = 0.25;
        let a = SdeSystem::new("a", 1, 1, 0, Arc::new(|_, _, _| dvector![0.5]), Arc::new(|_| DMatrix::zeros(1, 1)));
        let b = SdeSystem::new("b", 1, 1, 0, Arc::new(move |_, _, _| dvector![0.5 + delta]), Arc::new(|_| DMatrix::zeros(1, 1)));
        let (ta, tb, _) = simulate_coupled(&a, &b, &dvector![0.0], &zero_input(0), 0.01, 1.0, None, Seeds::new(0, 0)).unwrap();
        for (k, t) in ta.times.iter().enumerate() {
            assert_abs_diff_eq!((tb.states[k][0] - ta.states[k][0]).abs(), delta * t, epsilon = 1e-12);
        }
        let (sb, sa, _) = simulate_coupled(&b, &a, &dvector![0.0], &zero_input(0), 0.01, 1.0, None, Seeds::new(0, 0)).unwrap();
        assert_eq!((sa.states, sb.states), (ta.states, tb.states));
    }

    #[test]
    fn ensemble_matches_individual_paths() {
        let sys = linear("ou", -0.5, 0.4);
        let x0s = vec![dvector![0.1], dvector![0.2], dvector![-0.3]];
        let ens = simulate_ensemble(&sys, &x0s, &zero_input(0), 0.01, 0.5, None, 77).unwrap();
        for (i, tr) in ens.trajectories.iter().enumerate() {
            let solo = simulate(&sys, &x0s[i], &zero_input(0), 0.01, 0.5, Seeds::new(77, i as u64)).unwrap();
            assert_eq!(tr, &solo);
        }
    }

    #[test]
    fn rk4_harmonic_oscillator_is_accurate() {
        let f = |x: &DVector<f64>| dvector![x[1], -x[0]];
        let (states, ok) = rk4_rollout(f, &dvector![1.0, 0.0], 0.01, 10.0, 1e6).unwrap();
        assert!(ok);
        let last = states.last().unwrap();
        assert_abs_diff_eq!(last[0], 10f64.cos(), epsilon = 1e-8);
        assert_abs_diff_eq!(last[1], -(10f64.sin()), epsilon = 1e-8);
    }

    #[test]
    fn rk4_flags_divergence() {
        let f = |x: &DVector<f64>| x * 50.0;
        let (states, ok) = rk4_rollout(f, &dvector![1.0], 0.1, 20.0, 1e6).unwrap();
        assert!(!ok);
        assert!(states.len() < 201);
    }
}
