#![allow(dead_code)]

use condcorrupt::model::{point_stats, sample_component, ClassStats};
use condcorrupt::rng::{child, Stream};
use rand::Rng;

pub const TIMES: [f64; 4] = [0.01, 0.1, 1.0, 3.0];

/// Random mean with entries in [-1.5, 1.5].
pub fn random_mean(d: usize, rng: &mut Stream) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()
}

/// A training set of `n` draws around a random mean, with its statistics.
pub fn random_dataset(d: usize, n: usize, seed: u64, index: u64) -> (Vec<Vec<f64>>, ClassStats) {
    let mut rng = child(seed, index);
    let mu = random_mean(d, &mut rng);
    let points = sample_component(&mu, n, &mut rng);
    let stats = point_stats(&points).expect("finite points");
    (points, stats)
}
