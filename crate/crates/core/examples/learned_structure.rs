//! Assembles `J = Â − Âᵀ` and `R = D̂ᵀD̂` from freshly initialised networks and
//! reports how far they are from skew-symmetric and positive semidefinite.

use nalgebra::DVector;
use sphnn::sde::{van_der_pol_coefficients, NoiseAmplitude};
use sphnn::structure::min_eigenvalue;
use sphnn::training::{HSource, JSource, ModelSpec, RSource, SphnnModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let template = van_der_pol_coefficients(-0.5, NoiseAmplitude::Constant(0.1))?;
    let spec = ModelSpec {
        h: HSource::Learned,
        j: JSource::Learned,
        r: RSource::Learned,
        hidden: vec![16, 16],
        ..ModelSpec::conservative(2)
    };
    let (mut skew, mut min_eig) = (0.0f64, f64::INFINITY);
    for seed in 0..200 {
        let c = SphnnModel::new(spec.clone(), template.clone(), seed)?.coefficient_set();
        for i in 0..10 {
            let x = DVector::from_vec(vec![-2.0 + 0.4 * i as f64, 1.5 - 0.3 * i as f64]);
            let j = c.j(&x)?;
            skew = skew.max((&j + j.transpose()).abs().max());
            min_eig = min_eig.min(min_eigenvalue(&c.r(&x)?));
        }
    }
    println!("2000 evaluations: max |J + J^T| = {skew:e}, min eigenvalue of R = {min_eig:e}");
    Ok(())
}
