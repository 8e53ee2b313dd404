//! Builds transitions from simulated Duffing paths and compares the raw
//! increment targets with their nearest-neighbour averages against the true drift.

use nalgebra::{dvector, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphnn::data::{ce_targets, extract_transitions_every, ib_targets};
use sphnn::sde::{simulate_ensemble, zero_input, Benchmark, BenchmarkKind, BenchmarkParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bench = Benchmark::new(BenchmarkKind::Duffing, BenchmarkParams::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x0s: Vec<DVector<f64>> = (0..20).map(|_| dvector![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]).collect();
    let ens = simulate_ensemble(&bench.system, &x0s, &zero_input(1), 0.01, 10.0, None, 9)?;
    let u0 = DVector::zeros(1);
    for stride in [1, 10] {
        let ds = extract_transitions_every(&ens, &zero_input(1), stride)?;
        let ib = ib_targets(&ds)?;
        let ce = ce_targets(&ds, 16)?;
        let rms = |targets: &[DVector<f64>]| {
            let sq: f64 = ds
                .transitions
                .iter()
                .zip(targets)
                .map(|(t, v)| (v - bench.system.drift_at(0.0, &t.x, &u0).unwrap()).norm_squared())
                .sum();
            (sq / ds.len() as f64).sqrt()
        };
        println!(
            "stride {stride:>2}: {} transitions, rms error vs drift: IB {:.3}, CE {:.3}",
            ds.len(),
            rms(&ib.targets),
            rms(&ce.targets)
        );
    }
    Ok(())
}
