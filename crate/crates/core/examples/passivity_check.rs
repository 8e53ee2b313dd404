//! Passivity residual over a box and the Monte-Carlo energy balance of the
//! stopped process, for the analytic mass-spring and a damped Van der Pol.

use nalgebra::dvector;
use sphnn::diagnostics::{passivity_residual, weak_passivity_mc, PassivityOptions};
use sphnn::sde::{mass_spring_coefficients, van_der_pol_coefficients, zero_input, NoiseAmplitude};
use sphnn::structure::CompactBox;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bx = CompactBox::default_for(2);
    let x0 = dvector![1.0, 0.0];
    let opts = PassivityOptions { n_paths: 1000, master_seed: 1, ..PassivityOptions::default() };
    let cases = [
        ("mass_spring", mass_spring_coefficients(1.0, 1.0)?),
        ("van_der_pol", van_der_pol_coefficients(-0.5, NoiseAmplitude::Constant(0.1))?),
    ];
    for (name, c) in cases {
        let rep = weak_passivity_mc(&c, &x0, &zero_input(1), &bx, 0.01, 1.0, &opts)?;
        let last = rep.times.len() - 1;
        println!("{name}: r(x0) = {:.4}, c0 over the box = {:.4}", passivity_residual(&c, &x0)?, rep.c0_hat);
        println!(
            "  E H(X_T) = {:.4} +/- {:.4}, bound {:.4}, {} paths stopped, holds within 2 se: {}",
            rep.mean_energy[last],
            rep.se_energy[last],
            rep.mean_energy[last] + rep.margin[last],
            rep.exited,
            rep.holds_within(2.0)
        );
    }
    Ok(())
}
