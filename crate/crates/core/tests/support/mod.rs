//! Oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphnn::data::{ce_targets, ib_targets, Transition, TransitionDataset, VelocityTargets};
use sphnn::diagnostics::{passivity_residual, weak_passivity_mc, PassivityOptions, PassivityReport};
use sphnn::diffnet::ScalarField;
use sphnn::sde::{mass_spring_coefficients, rk4_rollout, van_der_pol_coefficients, zero_input, NoiseAmplitude};
use sphnn::structure::{canonical_j, drift, min_eigenvalue, CoefficientSet, CompactBox};
use sphnn::training::{loss_and_grad, HSource, JSource, LossKind, ModelSpec, RSource, SigmaSource, SphnnModel};

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

/// Every coefficient learned, on a 2-d state with one input.
pub fn full_model(seed: u64, hidden: Vec<usize>) -> SphnnModel {
    let template = van_der_pol_coefficients(-0.5, NoiseAmplitude::Constant(0.1)).unwrap();
    let spec = ModelSpec {
        h: HSource::Learned,
        j: JSource::Learned,
        r: RSource::Learned,
        sigma: SigmaSource::Learned,
        sigma_cols: 2,
        hidden,
    };
    SphnnModel::new(spec, template, seed).unwrap()
}

pub fn random_dataset(rng: &mut ChaCha8Rng, count: usize) -> TransitionDataset {
    let mut ds = TransitionDataset::new(2, 1, 0.05);
    for _ in 0..count {
        let x = DVector::from_fn(2, |_, _| rng.random_range(-1.5..1.5));
        let x_next = &x + DVector::from_fn(2, |_, _| rng.random_range(-0.2..0.2));
        ds.push(Transition {
            x,
            x_next,
            u: DVector::from_element(1, rng.random_range(-1.0..1.0)),
        })
        .unwrap();
    }
    ds
}

/// Relative error between the analytic loss gradient and central differences
/// along a few random coordinates of every field.
pub fn loss_gradient_error(
    model: &SphnnModel,
    kind: LossKind,
    ds: &TransitionDataset,
    targets: Option<&VelocityTargets>,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let jitter = 1e-3;
    let (_, grads) = loss_and_grad(model, kind, ds, targets, &idx, jitter).unwrap();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (k, id) in model.field_ids().into_iter().enumerate() {
        let len = model.params(id).unwrap().len();
        for _ in 0..6 {
            let p = rng.random_range(0..len);
            let h = 1e-5;
            let mut plus = model.clone();
            plus.params_mut(id).unwrap().as_mut_slice()[p] += h;
            let mut minus = model.clone();
            minus.params_mut(id).unwrap().as_mut_slice()[p] -= h;
            let lp = loss_and_grad(&plus, kind, ds, targets, &idx, jitter).unwrap().0;
            let lm = loss_and_grad(&minus, kind, ds, targets, &idx, jitter).unwrap().0;
            numeric.push((lp - lm) / (2.0 * h));
            analytic.push(grads[k].as_slice()[p]);
        }
    }
    rel_err(&analytic, &numeric)
}

/// Worst gradient error of the IB, CE and NLL losses over `cases` random models and datasets.
pub fn worst_loss_gradient_errors(cases: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 3];
    for case in 0..cases {
        let model = full_model(case, vec![6, 5]);
        let ds = random_dataset(&mut rng, 4);
        let ib = ib_targets(&ds).unwrap();
        let ce = ce_targets(&ds, 2).unwrap();
        worst[0] = worst[0].max(loss_gradient_error(&model, LossKind::Ib, &ds, Some(&ib), &mut rng));
        worst[1] = worst[1].max(loss_gradient_error(&model, LossKind::Ce, &ds, Some(&ce), &mut rng));
        worst[2] = worst[2].max(loss_gradient_error(&model, LossKind::Nll, &ds, None, &mut rng));
    }
    worst
}

/// Worst relative input-gradient error and absolute input-Hessian error of
/// random scalar networks against central differences.
pub fn worst_input_derivative_errors(cases: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    let h = 1e-5;
    for case in 0..cases {
        let field = ScalarField::glorot(3, &[7, 5], case).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let shifted = |i: usize, d: f64| {
            let mut y = x.clone();
            y[i] += d;
            y
        };
        let g = field.input_gradient(&x).unwrap();
        let fd: Vec<f64> = (0..3)
            .map(|i| (field.value(&shifted(i, h)).unwrap() - field.value(&shifted(i, -h)).unwrap()) / (2.0 * h))
            .collect();
        worst_g = worst_g.max(rel_err(&g, &fd));

        let hess = field.input_hessian(&x).unwrap();
        let mut fd_h = DMatrix::zeros(3, 3);
        for j in 0..3 {
            let gp = field.input_gradient(&shifted(j, h)).unwrap();
            let gm = field.input_gradient(&shifted(j, -h)).unwrap();
            for i in 0..3 {
                fd_h[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        worst_h = worst_h.max((&hess - &fd_h).amax());
    }
    (worst_g, worst_h)
}

/// Largest `‖J + Jᵀ‖∞` and smallest eigenvalue of `R` over random learned
/// structures evaluated at random states.
pub fn structural_extremes(draws: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut skew, mut min_eig) = (0.0f64, f64::INFINITY);
    for draw in 0..draws {
        let width = rng.random_range(2..12);
        let c = full_model(rng.random::<u64>() ^ draw, vec![width, width]).coefficient_set();
        let x = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
        let j = c.j(&x).unwrap();
        skew = skew.max((&j + j.transpose()).abs().max());
        min_eig = min_eig.min(min_eigenvalue(&c.r(&x).unwrap()));
    }
    (skew, min_eig)
}

/// Largest `|H(x_t) − H(x₀)|` along the noise-free undamped mass-spring from `(1, 0)`.
pub fn mass_spring_energy_drift(dt: f64, horizon: f64) -> f64 {
    let c = mass_spring_coefficients(1.0, 1.0).unwrap();
    let x0 = dvector![1.0, 0.0];
    let u = DVector::zeros(1);
    let (states, completed) = rk4_rollout(|x| drift(&c, x, &u).unwrap(), &x0, dt, horizon, 1e6).unwrap();
    assert!(completed);
    let h0 = c.h(&x0).unwrap();
    states.iter().map(|x| (c.h(x).unwrap() - h0).abs()).fold(0.0, f64::max)
}

/// Residual at `(1, 0)` and the Monte-Carlo energy rate over `[0, 0.01]` with its standard error.
pub fn mass_spring_dynkin(n_paths: usize, seed: u64) -> (f64, PassivityReport) {
    let c = mass_spring_coefficients(1.0, 1.0).unwrap();
    let x0 = dvector![1.0, 0.0];
    let r = passivity_residual(&c, &x0).unwrap();
    let opts = PassivityOptions {
        n_paths,
        master_seed: seed,
        ..PassivityOptions::default()
    };
    let rep = weak_passivity_mc(&c, &x0, &zero_input(1), &CompactBox::default_for(2), 1e-3, 0.01, &opts).unwrap();
    (r, rep)
}

/// Damped oscillator `H = ½|x|²`, `J = ω J₀`, `R = γI`, radial diffusion `s·x`:
/// the residual is `(½s² − γ)|x|²`, strictly negative on boxes away from the origin.
pub fn damped_oscillator(omega: f64, gamma: f64, s: f64) -> CoefficientSet {
    let root = gamma.sqrt();
    CoefficientSet::builder(2, 1, 1)
        .hamiltonian(
            Arc::new(|x| 0.5 * x.norm_squared()),
            Arc::new(|x| x.clone()),
            Arc::new(|_| DMatrix::identity(2, 2)),
        )
        .constant_interconnection(canonical_j(2).unwrap() * omega)
        .dissipation_factor(Arc::new(move |_| DMatrix::identity(2, 2) * root))
        .diffusion(Arc::new(move |x| DMatrix::from_column_slice(2, 1, x.as_slice()) * s))
        .constant_input_map(dmatrix![0.0; 1.0])
        .build()
        .unwrap()
}

/// The box for [`damped_oscillator`] checks: right of the origin, around `(1, 0)`.
pub fn damped_box() -> CompactBox {
    CompactBox::new(dvector![0.5, -0.75], dvector![1.5, 0.75], 21).unwrap()
}
