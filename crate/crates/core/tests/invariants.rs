//! Structural, conservation and energy-rate properties of assembled models.

mod support;

use nalgebra::{dvector, DVector};
use proptest::prelude::*;
use sphnn::diagnostics::{residual_grid, weak_passivity_mc, PassivityOptions};
use sphnn::structure::min_eigenvalue;
use support::{damped_box, damped_oscillator, full_model, mass_spring_dynkin, mass_spring_energy_drift};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn assembled_j_is_skew_and_r_is_psd(
        seed in any::<u64>(),
        width in 2usize..12,
        x in proptest::collection::vec(-3.0f64..3.0, 2),
    ) {
        let c = full_model(seed, vec![width, width]).coefficient_set();
        let x = DVector::from_vec(x);
        let j = c.j(&x).unwrap();
        let r = c.r(&x).unwrap();
        prop_assert!((&j + j.transpose()).abs().max() <= 1e-12);
        prop_assert!(min_eigenvalue(&r) >= -1e-10);
    }
}

#[test]
fn undamped_mass_spring_rollout_conserves_energy() {
    let drift = mass_spring_energy_drift(1e-3, 20.0);
    assert!(drift < 1e-3, "energy drift {drift}");
}

#[test]
fn mass_spring_residual_and_energy_rate_agree() {
    let (r, rep) = mass_spring_dynkin(1000, 2024);
    assert!((r - 0.5).abs() < 1e-8, "{r}");
    assert_eq!(rep.rate0, r);
    let (rate, se) = rep.rate_at(rep.times.len() - 1);
    assert!((rate - rep.rate0).abs() <= 3.0 * se, "rate {rate} ± {se} vs {}", rep.rate0);
}

#[test]
fn damped_oscillator_is_strictly_passive_away_from_origin() {
    let c = damped_oscillator(0.2, 0.3, 0.5);
    let bx = damped_box();
    assert!(residual_grid(&c, &bx).unwrap().iter().all(|r| *r <= -0.04));
    let opts = PassivityOptions {
        n_paths: 200,
        master_seed: 5,
        strict: true,
        ..PassivityOptions::default()
    };
    let u = |t: f64| dvector![0.3 * t.sin()];
    let rep = weak_passivity_mc(&c, &dvector![1.0, 0.0], &u, &bx, 0.01, 0.5, &opts).unwrap();
    assert!(rep.c0_hat < 0.0);
    assert!(rep.exited < rep.n_paths / 2, "{} paths stopped", rep.exited);
    assert!(rep.holds_within(2.0));
}
