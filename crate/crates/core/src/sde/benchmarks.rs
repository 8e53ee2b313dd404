//! The three oscillator benchmarks in Itô form, with their port-Hamiltonian
//! structure and the noise-free reference dynamics used for evaluation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use super::system::SdeSystem;
use crate::error::{Error, Result};
use crate::structure::{canonical_j, CoefficientSet, ScalarMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkKind {
    MassSpring,
    Duffing,
    VanDerPol,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 3] = [BenchmarkKind::MassSpring, BenchmarkKind::Duffing, BenchmarkKind::VanDerPol];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkKind::MassSpring => "mass_spring",
            BenchmarkKind::Duffing => "duffing",
            BenchmarkKind::VanDerPol => "van_der_pol",
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mass_spring" => Ok(BenchmarkKind::MassSpring),
            "duffing" => Ok(BenchmarkKind::Duffing),
            "van_der_pol" => Ok(BenchmarkKind::VanDerPol),
            other => Err(Error::InvalidParameter(format!(
                "unknown system `{other}` (expected mass_spring, duffing or van_der_pol)"
            ))),
        }
    }
}

/// Noise amplitude `ξ(x₂)` of the Van der Pol oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseAmplitude {
    Constant(f64),
    /// `ξ(x₂) = offset + slope·x₂`.
    Affine { offset: f64, slope: f64 },
}

impl NoiseAmplitude {
    pub fn value(self, x2: f64) -> f64 {
        match self {
            NoiseAmplitude::Constant(c) => c,
            NoiseAmplitude::Affine { offset, slope } => offset + slope * x2,
        }
    }

    pub fn derivative(self, _x2: f64) -> f64 {
        match self {
            NoiseAmplitude::Constant(_) => 0.0,
            NoiseAmplitude::Affine { slope, .. } => slope,
        }
    }
}

/// Mass-spring oscillator in Itô form, state `(q, p)`:
/// drift `(p/m − kq/(2m), −kq − kp/(2m) + F) + g u`, diffusion `(p/m, −kq)ᵀ`.
pub fn make_mass_spring(k: f64, m: f64, force: f64) -> Result<SdeSystem> {
    if !(k > 0.0) || !(m > 0.0) || !force.is_finite() {
        return Err(Error::InvalidParameter(format!("mass-spring needs k, m > 0 (k={k}, m={m}, F={force})")));
    }
    let sys = SdeSystem::new(
        "mass_spring",
        2,
        1,
        1,
        Arc::new(move |_, x, u| {
            let (q, p) = (x[0], x[1]);
            dvector![p / m - k * q / (2.0 * m), -k * q - k * p / (2.0 * m) + force + u[0]]
        }),
        Arc::new(move |x| dmatrix![x[1] / m; -k * x[0]]),
    );
    Ok(sys.with_coefficients(mass_spring_coefficients(k, m)?))
}

/// `H = ½kq² + ½p²/m`, canonical `J`, `R = 0`, `σ = (p/m, −kq)ᵀ`, `g = (0, 1)ᵀ`.
pub fn mass_spring_coefficients(k: f64, m: f64) -> Result<CoefficientSet> {
    CoefficientSet::builder(2, 1, 1)
        .hamiltonian(
            Arc::new(move |x| 0.5 * k * x[0] * x[0] + 0.5 * x[1] * x[1] / m),
            Arc::new(move |x| dvector![k * x[0], x[1] / m]),
            Arc::new(move |_| dmatrix![k, 0.0; 0.0, 1.0 / m]),
        )
        .constant_interconnection(canonical_j(2)?)
        .diffusion(Arc::new(move |x| dmatrix![x[1] / m; -k * x[0]]))
        .constant_input_map(dmatrix![0.0; 1.0])
        .build()
}

/// Undamped Duffing oscillator: drift `(p, q − q³ + F) + g u`, diffusion `σ₀ I₂`.
pub fn make_duffing(force: f64, sigma0: f64) -> Result<SdeSystem> {
    if !force.is_finite() || !(sigma0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("duffing needs finite F and sigma0 >= 0 (F={force}, sigma0={sigma0})")));
    }
    let sys = SdeSystem::new(
        "duffing",
        2,
        2,
        1,
        Arc::new(move |_, x, u| dvector![x[1], x[0] - x[0].powi(3) + force + u[0]]),
        Arc::new(move |_| DMatrix::identity(2, 2) * sigma0),
    );
    Ok(sys.with_coefficients(duffing_coefficients(sigma0)?))
}

/// `H = ½p² − ½q² + ¼q⁴`, canonical `J`, `R = 0`, `σ = σ₀ I₂`, `g = (0, 1)ᵀ`.
pub fn duffing_coefficients(sigma0: f64) -> Result<CoefficientSet> {
    CoefficientSet::builder(2, 2, 1)
        .hamiltonian(
            Arc::new(|x| 0.5 * x[1] * x[1] - 0.5 * x[0] * x[0] + 0.25 * x[0].powi(4)),
            Arc::new(|x| dvector![-x[0] + x[0].powi(3), x[1]]),
            Arc::new(|x| dmatrix![-1.0 + 3.0 * x[0] * x[0], 0.0; 0.0, 1.0]),
        )
        .constant_interconnection(canonical_j(2)?)
        .diffusion(Arc::new(move |_| DMatrix::identity(2, 2) * sigma0))
        .constant_input_map(dmatrix![0.0; 1.0])
        .build()
}

/// Stochastic Van der Pol oscillator:
/// drift `(x₂, μ(1 − x₁²)x₂ − x₁ + ½ξ(x₂)ξ′(x₂)) + g u`, diffusion `(0, ξ(x₂))ᵀ`.
pub fn make_van_der_pol(mu: f64, xi: NoiseAmplitude) -> Result<SdeSystem> {
    if !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("van der pol needs finite mu, got {mu}")));
    }
    let sys = SdeSystem::new(
        "van_der_pol",
        2,
        1,
        1,
        Arc::new(move |_, x, u| {
            let (x1, x2) = (x[0], x[1]);
            let ito = 0.5 * xi.value(x2) * xi.derivative(x2);
            dvector![x2, mu * (1.0 - x1 * x1) * x2 - x1 + ito + u[0]]
        }),
        Arc::new(move |x| dmatrix![0.0; xi.value(x[1])]),
    );
    Ok(sys.with_coefficients(van_der_pol_coefficients(mu, xi)?))
}

/// Storage `H = ½xᵀx`, canonical `J`, and dissipation factor
/// `D = diag(0, √(−μ(1 − x₁²)))`. The factor is clipped at zero where
/// `μ(1 − x₁²) > 0`, so the set matches the oscillator exactly only on the
/// region where the oscillator dissipates the storage.
pub fn van_der_pol_coefficients(mu: f64, xi: NoiseAmplitude) -> Result<CoefficientSet> {
    CoefficientSet::builder(2, 1, 1)
        .hamiltonian(
            Arc::new(|x| 0.5 * x.norm_squared()),
            Arc::new(|x| x.clone()),
            Arc::new(|_| DMatrix::identity(2, 2)),
        )
        .constant_interconnection(canonical_j(2)?)
        .dissipation_factor(Arc::new(move |x| {
            let damping = (-mu * (1.0 - x[0] * x[0])).max(0.0);
            dmatrix![0.0, 0.0; 0.0, damping.sqrt()]
        }))
        .diffusion(Arc::new(move |x| dmatrix![0.0; xi.value(x[1])]))
        .constant_input_map(dmatrix![0.0; 1.0])
        .build()
}

/// Physical parameters of a benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkParams {
    pub k: f64,
    pub mass: f64,
    pub force: f64,
    pub sigma0: f64,
    pub mu: f64,
    pub xi: NoiseAmplitude,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        BenchmarkParams {
            k: 1.0,
            mass: 1.0,
            force: 0.0,
            sigma0: 0.05,
            mu: -0.5,
            xi: NoiseAmplitude::Constant(0.1),
        }
    }
}

/// Everything needed to generate data for, and evaluate models of, one benchmark.
#[derive(Clone)]
pub struct Benchmark {
    pub kind: BenchmarkKind,
    pub params: BenchmarkParams,
    /// The Itô SDE that generates training data.
    pub system: SdeSystem,
    /// Port-Hamiltonian structure (true `H`, `J`, `R`, `σ`, `g`).
    pub coefficients: CoefficientSet,
    /// Noise-free reference vector field for rollout evaluation: the drift
    /// with its Itô correction removed.
    pub reference: SdeSystem,
    /// Ground-truth energy (or storage) used for energy errors.
    pub energy: ScalarMap,
}

impl fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Benchmark").field("kind", &self.kind).field("params", &self.params).finish()
    }
}

impl Benchmark {
    pub fn new(kind: BenchmarkKind, params: BenchmarkParams) -> Result<Self> {
        let BenchmarkParams { k, mass, force, sigma0, mu, xi } = params;
        let (system, coefficients, reference_drift): (SdeSystem, CoefficientSet, super::system::DriftFn) = match kind {
            BenchmarkKind::MassSpring => (
                make_mass_spring(k, mass, force)?,
                mass_spring_coefficients(k, mass)?,
                Arc::new(move |_, x, u| dvector![x[1] / mass, -k * x[0] + force + u[0]]),
            ),
            BenchmarkKind::Duffing => (
                make_duffing(force, sigma0)?,
                duffing_coefficients(sigma0)?,
                Arc::new(move |_, x, u| dvector![x[1], x[0] - x[0].powi(3) + force + u[0]]),
            ),
            BenchmarkKind::VanDerPol => (
                make_van_der_pol(mu, xi)?,
                van_der_pol_coefficients(mu, xi)?,
                Arc::new(move |_, x, u| dvector![x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0] + u[0]]),
            ),
        };
        let reference = SdeSystem::new(
            format!("{kind}-reference"),
            2,
            system.d(),
            1,
            reference_drift,
            Arc::new({
                let d = system.d();
                move |_| DMatrix::zeros(2, d)
            }),
        );
        let c = coefficients.clone();
        let energy: ScalarMap = Arc::new(move |x: &DVector<f64>| c.h(x).expect("2-d state"));
        Ok(Benchmark {
            kind,
            params,
            system,
            coefficients,
            reference,
            energy,
        })
    }

    /// Itô drift minus reference drift at `x`: the `½(∂σ)σ` term that converts
    /// the port-Hamiltonian drift into the drift of the simulated Itô SDE.
    pub fn ito_correction(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let u = DVector::zeros(self.system.m());
        Ok(self.system.drift_at(0.0, x, &u)? - self.reference.drift_at(0.0, x, &u)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{rk4_rollout, simulate, zero_input, Seeds};
    use crate::structure::drift;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ito_correction_vanishes_for_constant_noise() {
        let p = BenchmarkParams::default();
        let x = dvector![0.7, -0.4];
        let ms = Benchmark::new(BenchmarkKind::MassSpring, p).unwrap();
        assert_eq!(ms.ito_correction(&x).unwrap(), dvector![-0.35, 0.2]);
        for kind in [BenchmarkKind::Duffing, BenchmarkKind::VanDerPol] {
            let b = Benchmark::new(kind, p).unwrap();
            assert_eq!(b.ito_correction(&x).unwrap(), dvector![0.0, 0.0]);
        }
    }

    #[test]
    fn mass_spring_ito_form() {
        let sys = make_mass_spring(1.0, 1.0, 0.0).unwrap();
        let x = dvector![1.0, 0.0];
        assert_eq!(sys.drift_at(0.0, &x, &dvector![0.0]).unwrap(), dvector![-0.5, -1.0]);
        assert_eq!(sys.diffusion_at(&x).unwrap(), dmatrix![0.0; -1.0]);
    }

    #[test]
    fn mass_spring_ito_correction_is_stratonovich_shift() {
        // drift − (J − R)∇H must equal ½ (∂σ) σ for σ = (p/m, −kq).
        let (k, m) = (2.0, 0.5);
        let sys = make_mass_spring(k, m, 0.0).unwrap();
        let c = mass_spring_coefficients(k, m).unwrap();
        let x = dvector![0.3, -1.2];
        let gap = sys.drift_at(0.0, &x, &dvector![0.0]).unwrap() - drift(&c, &x, &dvector![0.0]).unwrap();
        let dsigma = dmatrix![0.0, 1.0 / m; -k, 0.0];
        let sigma = dvector![x[1] / m, -k * x[0]];
        let expected = dsigma * sigma * 0.5;
        assert_abs_diff_eq!((gap - expected).amax(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn duffing_well_bottom_is_equilibrium() {
        let sys = make_duffing(0.0, 0.05).unwrap();
        assert_eq!(sys.drift_at(0.0, &dvector![1.0, 0.0], &dvector![0.0]).unwrap(), dvector![0.0, 0.0]);
        assert_eq!(sys.diffusion_at(&dvector![0.0, 0.0]).unwrap(), DMatrix::identity(2, 2) * 0.05);
    }

    #[test]
    fn van_der_pol_constant_noise_has_no_ito_term() {
        let mu = 1.3;
        let sys = make_van_der_pol(mu, NoiseAmplitude::Constant(0.4)).unwrap();
        let x = dvector![0.5, -0.7];
        let classic = dvector![x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0]];
        assert_eq!(sys.drift_at(0.0, &x, &dvector![0.0]).unwrap(), classic);

        let affine = make_van_der_pol(mu, NoiseAmplitude::Affine { offset: 0.2, slope: 0.5 }).unwrap();
        let with_ito = affine.drift_at(0.0, &x, &dvector![0.0]).unwrap();
        assert_abs_diff_eq!(with_ito[1] - classic[1], 0.5 * (0.2 - 0.35) * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(make_mass_spring(0.0, 1.0, 0.0).is_err());
        assert!(make_mass_spring(1.0, -1.0, 0.0).is_err());
        assert!(make_duffing(0.0, -0.1).is_err());
        assert!(make_van_der_pol(f64::NAN, NoiseAmplitude::Constant(0.1)).is_err());
    }

    #[test]
    fn reference_dynamics_match_ph_drift() {
        for kind in [BenchmarkKind::MassSpring, BenchmarkKind::Duffing] {
            let b = Benchmark::new(kind, BenchmarkParams::default()).unwrap();
            for x in [dvector![0.3, -0.4], dvector![1.5, 0.2]] {
                let u = dvector![0.0];
                let r = b.reference.drift_at(0.0, &x, &u).unwrap();
                assert_abs_diff_eq!((r - drift(&b.coefficients, &x, &u).unwrap()).amax(), 0.0, epsilon = 1e-14);
            }
        }
        // Van der Pol: exact wherever the clipped factor is not active.
        let b = Benchmark::new(BenchmarkKind::VanDerPol, BenchmarkParams::default()).unwrap();
        let x = dvector![0.6, -0.8];
        let u = dvector![0.0];
        let r = b.reference.drift_at(0.0, &x, &u).unwrap();
        assert_abs_diff_eq!((r - drift(&b.coefficients, &x, &u).unwrap()).amax(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn noise_free_mass_spring_matches_fine_step_reference() {
        let sys = make_mass_spring(1.0, 1.0, 0.0).unwrap().noise_free();
        let x0 = dvector![1.0, 0.0];
        let coarse = simulate(&sys, &x0, &zero_input(1), 1e-3, 1.0, Seeds::new(0, 0)).unwrap();
        let fine = simulate(&sys, &x0, &zero_input(1), 1e-5, 1.0, Seeds::new(0, 0)).unwrap();
        let gap = (coarse.last_state() - fine.last_state()).amax();
        assert!(gap < 5e-3, "gap {gap}");

        // Independent check against RK4 on the same vector field.
        let u = dvector![0.0];
        let (rk, _) = rk4_rollout(|x| sys.drift_at(0.0, x, &u).unwrap(), &x0, 1e-3, 1.0, 1e6).unwrap();
        assert!((coarse.last_state() - rk.last().unwrap()).amax() < 5e-3);
    }
}
