#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use dys::SurvivalDataset;

fn names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn exponential_time(eta: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    -u.ln() * (-eta).exp()
}

/// Proportional-hazards data with `informative` features at shuffled
/// positions carrying coefficients +1, -1, +1, ... and the rest pure noise.
/// Returns the dataset and its coefficient vector.
pub fn sparse_linear(n: usize, p: usize, informative: usize, seed: u64) -> (SurvivalDataset, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut beta = vec![0.0; p];
    let mut idx: Vec<usize> = (0..p).collect();
    idx.shuffle(&mut rng);
    for (a, &j) in idx[..informative].iter().enumerate() {
        beta[j] = if a % 2 == 0 { 1.0 } else { -1.0 };
    }
    let x: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    let time: Vec<f64> = (0..n)
        .map(|i| {
            let eta: f64 = x[i * p..(i + 1) * p].iter().zip(&beta).map(|(a, b)| a * b).sum();
            exponential_time(eta, &mut rng)
        })
        .collect();
    (SurvivalDataset::new(x, p, time, vec![true; n], names(p)).unwrap(), beta)
}

/// Log-hazard `sin(1.5 x1) + 0.5 x2^2` with two noise features and
/// independent exponential censoring. No interactions.
pub fn additive(n: usize, seed: u64) -> SurvivalDataset {
    let p = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    let mut time = Vec::with_capacity(n);
    let mut event = Vec::with_capacity(n);
    for i in 0..n {
        let eta = (1.5 * x[i * p]).sin() + 0.5 * x[i * p + 1].powi(2);
        let t = exponential_time(eta, &mut rng);
        let c = 3.0 * exponential_time(0.0, &mut rng);
        time.push(t.min(c));
        event.push(t <= c);
    }
    SurvivalDataset::new(x, p, time, event, names(p)).unwrap()
}
