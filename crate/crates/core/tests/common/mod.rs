#![allow(dead_code)]

use alpr::Dataset;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian features, labels cycling through the classes so each has at least
/// `n / c` samples.
pub fn random_dataset(seed: u64, m: usize, n: usize, c: usize) -> Dataset {
    let mut r = rng(seed);
    let x = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut r));
    let labels = (0..n).map(|j| j % c + 1).collect();
    Dataset::new(x, labels, c).unwrap()
}

/// Random problem with `m ≤ 30`, `n ≤ 120`, `C ≤ 5`.
pub fn random_problem(seed: u64) -> Dataset {
    let mut r = rng(seed ^ 0xabcd);
    let m = r.random_range(2..=30);
    let c = r.random_range(2..=5);
    let n = r.random_range(3 * c..=120);
    random_dataset(seed, m, n, c)
}

/// Two well separated Gaussian blobs in 5 dimensions, `per_class` samples each.
pub fn two_blobs(seed: u64, per_class: usize) -> Dataset {
    let mut r = rng(seed);
    let n = 2 * per_class;
    let labels: Vec<usize> = (0..n).map(|j| if j < per_class { 1 } else { 2 }).collect();
    let x = DMatrix::from_fn(5, n, |_, j| {
        let centre = if labels[j] == 1 { 6.0 } else { -6.0 };
        let z: f64 = StandardNormal.sample(&mut r);
        centre + z
    });
    Dataset::new(x, labels, 2).unwrap()
}
