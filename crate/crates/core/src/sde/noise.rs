use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Standard normal draws for one simulated path.
///
/// Each path owns the ChaCha8 stream selected by `path_index` under the key
/// derived from `master_seed`, so paths are independent and reproducible no
/// matter which order (or thread) they are simulated in. Uniforms are mapped
/// to normals with the Box–Muller transform; both outputs of a pair are used.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NoiseStream {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(path_index);
        NoiseStream { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for z in out {
            *z = self.next_normal();
        }
    }

    pub fn next_uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}
