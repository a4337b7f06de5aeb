#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twosided::ModelParams;

pub const ASYMMETRIC: (f64, f64, f64, f64, f64) = (1.0, 3.0, 3.0, 1.0, 1.0);
pub const SYMMETRIC: (f64, f64, f64, f64, f64) = (1.0, 1.0, 1.0, 1.0, 1.0);

pub fn params(p: (f64, f64, f64, f64, f64)) -> ModelParams {
    ModelParams::new(p.0, p.1, p.2, p.3, p.4).unwrap()
}

pub fn example_sets() -> [(&'static str, ModelParams); 2] {
    [("(1,3,3,1,1)", params(ASYMMETRIC)), ("(1,1,1,1,1)", params(SYMMETRIC))]
}

/// Parameter in `[0.1, 10]`, log-uniform.
pub fn log_uniform<R: Rng>(rng: &mut R) -> f64 {
    10f64.powf(rng.random_range(-1.0..=1.0))
}

/// `count` reproducible random parameter sets.
pub fn random_params(count: usize, seed: u64) -> Vec<ModelParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            ModelParams::new(
                log_uniform(&mut rng),
                log_uniform(&mut rng),
                log_uniform(&mut rng),
                log_uniform(&mut rng),
                log_uniform(&mut rng),
            )
            .unwrap()
        })
        .collect()
}

pub fn report(id: u32, passed: bool, detail: impl AsRef<str>) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("[{tag}] AC-{id}: {}", detail.as_ref());
}
