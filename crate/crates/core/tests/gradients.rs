//! Finite-difference checks of input derivatives and of all loss gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphnn::data::ib_targets;
use sphnn::diffnet::{objective_param_gradient, Architecture, MlpParams, ScalarField};
use sphnn::training::{baseline_loss_and_grad, loss_and_grad, BaselineModel, FieldId, LossKind};

mod support;

use support::{full_model, random_dataset, rel_err, worst_input_derivative_errors, worst_loss_gradient_errors};

#[test]
fn loss_gradients_match_finite_differences() {
    let worst = worst_loss_gradient_errors(100);
    for (name, w) in ["ib", "ce", "nll"].iter().zip(worst) {
        assert!(w < 1e-4, "{name} gradient relative error {w}");
    }
}

#[test]
fn gradient_fields_line_up_with_field_ids() {
    let model = full_model(0, vec![6, 5]);
    assert_eq!(model.field_ids(), vec![FieldId::H, FieldId::A, FieldId::D, FieldId::Sigma]);
    let ds = random_dataset(&mut ChaCha8Rng::seed_from_u64(0), 3);
    let (_, grads) = loss_and_grad(&model, LossKind::Nll, &ds, None, &[0, 1, 2], 1e-6).unwrap();
    for (g, p) in grads.iter().zip(model.all_params()) {
        assert!(g.same_shape(p));
    }
}

#[test]
fn baseline_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..20 {
        let model = BaselineModel::new(2, &[6, 5], case).unwrap();
        let ds = random_dataset(&mut rng, 5);
        let t = ib_targets(&ds).unwrap();
        let idx: Vec<usize> = (0..ds.len()).collect();
        let (_, grad) = baseline_loss_and_grad(&model, &ds, &t, &idx).unwrap();
        let (mut a, mut fd) = (Vec::new(), Vec::new());
        for _ in 0..10 {
            let p = rng.random_range(0..model.params().len());
            let h = 1e-5;
            let mut plus = model.clone();
            plus.params_mut().as_mut_slice()[p] += h;
            let mut minus = model.clone();
            minus.params_mut().as_mut_slice()[p] -= h;
            let lp = baseline_loss_and_grad(&plus, &ds, &t, &idx).unwrap().0;
            let lm = baseline_loss_and_grad(&minus, &ds, &t, &idx).unwrap().0;
            fd.push((lp - lm) / (2.0 * h));
            a.push(grad.as_slice()[p]);
        }
        assert!(rel_err(&a, &fd) < 1e-5);
    }
}

#[test]
fn input_gradient_and_hessian_match_finite_differences() {
    let (g, h) = worst_input_derivative_errors(100);
    assert!(g < 1e-6, "input gradient relative error {g}");
    assert!(h < 1e-5, "input Hessian error {h}");
}

/// Parameter gradient of `‖∇H(x)‖²` through the generic objective interface.
#[test]
fn objective_with_input_gradient_matches_finite_differences() {
    let arch = Architecture::new(2, vec![6, 6], 1).unwrap();
    let x = [0.4, -0.9];
    let objective = |params: &[&MlpParams], grads: &mut [MlpParams]| {
        let field = ScalarField::new(params[0].clone())?;
        let (trace, g) = field.value_and_gradient(&x)?;
        let adj: Vec<f64> = g.iter().map(|v| 2.0 * v).collect();
        field.accumulate_param_grad(&trace, 0.0, &adj, &mut grads[0])?;
        Ok(g.iter().map(|v| v * v).sum::<f64>())
    };
    for seed in 0..20 {
        let params = MlpParams::glorot(&arch, seed);
        let (_, grads) = objective_param_gradient(&objective, &[&params]).unwrap();
        let (mut a, mut fd) = (Vec::new(), Vec::new());
        for p in (0..params.len()).step_by(3) {
            let h = 1e-5;
            let mut plus = params.clone();
            plus.as_mut_slice()[p] += h;
            let mut minus = params.clone();
            minus.as_mut_slice()[p] -= h;
            let mut scratch = vec![params.zeros_like()];
            let lp = objective(&[&plus], &mut scratch).unwrap();
            let lm = objective(&[&minus], &mut scratch).unwrap();
            fd.push((lp - lm) / (2.0 * h));
            a.push(grads[0].as_slice()[p]);
        }
        assert!(rel_err(&a, &fd) < 1e-6);
    }
}
