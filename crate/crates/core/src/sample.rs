//! Seeded sampling helpers shared by the checkers and the suite.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::group::GroupModel;
use crate::linalg::CMat;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform coordinates in the cube [-radius, radius]^d.
pub fn cube(rng: &mut SampleRng, d: usize, radius: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-radius..=radius)).collect()
}

/// Uniform coordinates in the closed Euclidean ball of the given radius,
/// by rejection from the cube.
pub fn ball(rng: &mut SampleRng, d: usize, radius: f64) -> Vec<f64> {
    loop {
        let x = cube(rng, d, radius);
        if x.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
            return x;
        }
    }
}

/// A random direction on the Euclidean unit sphere.
pub fn sphere(rng: &mut SampleRng, d: usize) -> Vec<f64> {
    loop {
        let x = ball(rng, d, 1.0);
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-3 {
            return x.into_iter().map(|v| v / n).collect();
        }
    }
}

/// exp of a random coordinate vector from the cube of the given radius.
pub fn element(rng: &mut SampleRng, group: &GroupModel, radius: f64) -> CMat {
    let xi = cube(rng, group.dim, radius);
    group.exp(&xi).expect("finite coordinates")
}
