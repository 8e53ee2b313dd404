//! Coupled-path divergence between the mass-spring and a perturbed copy,
//! compared with the Gronwall bound from the coefficient gaps.

use std::sync::Arc;

use nalgebra::dvector;
use sphnn::diagnostics::stability_bound_check;
use sphnn::sde::{make_mass_spring, zero_input, SdeSystem};
use sphnn::structure::CompactBox;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = make_mass_spring(1.0, 1.0, 0.0)?;
    let bx = CompactBox::default_for(2);
    for eps in [0.0, 0.01, 0.05] {
        let base = truth.clone();
        let perturbed = SdeSystem::new(
            "perturbed",
            2,
            1,
            1,
            Arc::new(move |t, x, u| base.drift_at(t, x, u).unwrap() + dvector![0.0, eps * x[0]]),
            {
                let base = truth.clone();
                Arc::new(move |x| base.diffusion_at(x).unwrap())
            },
        );
        let rep = stability_bound_check(&truth, &perturbed, &bx, &dvector![1.0, 0.0], &zero_input(1), 0.01, 0.5, 200, 4)?;
        println!(
            "eps {eps:<5} alpha {:.3} beta {:.3} L {:.3}  F(T) {:.3e} <= bound {:.3e}: {}",
            rep.alpha,
            rep.beta,
            rep.l_hat,
            rep.empirical_f_t,
            rep.analytic_bound,
            rep.holds()
        );
    }
    Ok(())
}
