use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;

/// Root of every stochastic draw. Equal seeds give bit-identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed for stream `index` (splitmix64 finaliser).
    pub fn derive(self, index: u64) -> Seed {
        let mut z = self
            .0
            .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Seed(z ^ (z >> 31))
    }
}

/// He (Kaiming) normal initialisation, fan-in mode: i.i.d. N(0, 2/fan_in).
pub fn he_init(shape: &[usize], fan_in: usize, seed: Seed) -> Tensor {
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let mut rng = seed.rng();
    let n = shape.iter().product();
    let data = (0..n).map(|_| normal.sample(&mut rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("sized from shape")
}
