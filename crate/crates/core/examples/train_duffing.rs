//! Trains a conservative structured model and the unstructured baseline on
//! Duffing data, then compares noise-free rollouts from `(1, 0.5)`.
//!
//! `cargo run --release --example train_duffing -- [epochs]`

use nalgebra::{dvector, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphnn::data::{extract_transitions_every, ib_targets};
use sphnn::diagnostics::{rollout_metrics, RolloutSettings};
use sphnn::sde::{simulate_ensemble, zero_input, Benchmark, BenchmarkKind, BenchmarkParams};
use sphnn::training::{baseline_train_model, train_model, BaselineModel, ModelSpec, SphnnModel, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(300);
    let bench = Benchmark::new(BenchmarkKind::Duffing, BenchmarkParams::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x0s: Vec<DVector<f64>> = (0..20).map(|_| dvector![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]).collect();
    let ens = simulate_ensemble(&bench.system, &x0s, &zero_input(1), 0.01, 10.0, None, 7)?;
    let ds = extract_transitions_every(&ens, &zero_input(1), 10)?;
    let targets = ib_targets(&ds)?;
    let cfg = TrainConfig { epochs, seed: 3, ..TrainConfig::default() };
    let hidden = vec![64, 64];

    let spec = ModelSpec { hidden: hidden.clone(), ..ModelSpec::conservative(2) };
    let sph = train_model(&ds, Some(&targets), SphnnModel::new(spec, bench.coefficients.clone(), 3)?, &cfg)?;
    let base = baseline_train_model(&ds, &targets, BaselineModel::new(2, &hidden, 3)?, &cfg)?;
    println!(
        "structured loss {:.4} -> {:.4}, baseline loss {:.4} -> {:.4}",
        sph.history[0],
        sph.history[epochs - 1],
        base.history[0],
        base.history[epochs - 1]
    );

    let u0 = DVector::zeros(1);
    let truth = |x: &DVector<f64>| bench.reference.drift_at(0.0, x, &u0).unwrap();
    let energy = |x: &DVector<f64>| (bench.energy)(x);
    let held: Vec<DVector<f64>> = ds.transitions.iter().step_by(50).map(|t| t.x.clone()).collect();
    let settings = RolloutSettings { x0: dvector![1.0, 0.5], ..RolloutSettings::default() };
    let m_sph = rollout_metrics(|x| sph.model.drift(x, &u0).unwrap(), truth, energy, &held, &settings)?.metrics;
    let m_base = rollout_metrics(|x| base.model.drift(x).unwrap(), truth, energy, &held, &settings)?.metrics;
    for (name, m) in [("structured", m_sph), ("baseline", m_base)] {
        println!(
            "{name:<10} mean|dq| {:.4}  mean|dp| {:.4}  mean|dH| {:.4}",
            m.mean_abs_dq, m.mean_abs_dp, m.mean_abs_dh
        );
    }
    Ok(())
}
