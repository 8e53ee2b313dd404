//! Seeded Euler–Maruyama simulation of stochastic port-Hamiltonian systems
//! and the oscillator benchmarks.

mod benchmarks;
mod csv_io;
mod noise;
mod system;

pub use benchmarks::{
    duffing_coefficients, make_duffing, make_mass_spring, make_van_der_pol, mass_spring_coefficients,
    van_der_pol_coefficients, Benchmark, BenchmarkKind, BenchmarkParams, NoiseAmplitude,
};
pub use csv_io::{save_ensemble, save_trajectory, write_trajectory};
pub use noise::NoiseStream;
pub use system::{
    em_step, rk4_rollout, simulate, simulate_coupled, simulate_ensemble, simulate_stopped, step_count, zero_input,
    DiffusionFn, DriftFn, Ensemble, SdeSystem, Seeds, Trajectory,
};
