//! Simulates a small ensemble of every benchmark and writes the paths as CSV.
//!
//! `cargo run --release --example simulate_benchmarks -- [out_dir]`

use std::path::PathBuf;

use nalgebra::dvector;
use sphnn::sde::{save_ensemble, simulate_ensemble, zero_input, Benchmark, BenchmarkKind, BenchmarkParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("sphnn_paths"));
    std::fs::create_dir_all(&out)?;
    for kind in [BenchmarkKind::MassSpring, BenchmarkKind::Duffing, BenchmarkKind::VanDerPol] {
        let bench = Benchmark::new(kind, BenchmarkParams::default())?;
        let x0s = vec![dvector![1.0, 0.0], dvector![0.0, 0.8], dvector![-0.5, 0.5]];
        let ens = simulate_ensemble(&bench.system, &x0s, &zero_input(1), 0.01, 10.0, None, 42)?;
        let files = save_ensemble(&ens, &out, bench.system.name.as_str())?;
        for tr in &ens.trajectories {
            let first = (bench.energy)(&tr.states[0]);
            let last = (bench.energy)(tr.states.last().unwrap());
            println!("{:<12} path {}: H {first:.3} -> {last:.3}", bench.system.name, tr.path_index);
        }
        println!("wrote {} files to {}", files.len(), out.display());
    }
    Ok(())
}
