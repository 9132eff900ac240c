//! Three-ring manifold data: two concentric-circle features plus one uniform noise
//! feature.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{AlprError, Result};

/// Ring radius of each class.
pub const RING_RADII: [f64; 3] = [1.0, 2.0, 3.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeRingSpec {
    pub samples_per_class: usize,
    /// The third feature is drawn from `U(−A, A)`.
    pub noise_amplitude: f64,
    /// Standard deviation of the radial jitter.
    pub radial_sigma: f64,
    pub seed: u64,
}

impl ThreeRingSpec {
    /// Noise amplitude 20.
    pub fn th1(seed: u64) -> Self {
        Self {
            samples_per_class: 1000,
            noise_amplitude: 20.0,
            radial_sigma: 0.1,
            seed,
        }
    }

    /// Noise amplitude 2000.
    pub fn th2(seed: u64) -> Self {
        Self {
            noise_amplitude: 2000.0,
            ..Self::th1(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_class < 2 {
            return Err(AlprError::InvalidConfig("samples_per_class must be at least 2".into()));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(AlprError::InvalidConfig("noise_amplitude must be nonnegative".into()));
        }
        if !(self.radial_sigma >= 0.0 && self.radial_sigma.is_finite()) {
            return Err(AlprError::InvalidConfig("radial_sigma must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Samples the rings class by class. Class `c` lies at radius `RING_RADII[c-1]`.
pub fn generate(spec: &ThreeRingSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let jitter = Normal::new(0.0, spec.radial_sigma)
        .map_err(|e| AlprError::InvalidConfig(e.to_string()))?;
    let n = 3 * spec.samples_per_class;
    let mut x = DMatrix::zeros(3, n);
    let mut labels = Vec::with_capacity(n);
    for (c, radius) in RING_RADII.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            let j = labels.len();
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let r = radius + jitter.sample(&mut rng);
            let u = if spec.noise_amplitude > 0.0 {
                rng.random_range(-spec.noise_amplitude..spec.noise_amplitude)
            } else {
                0.0
            };
            x[(0, j)] = r * theta.cos();
            x[(1, j)] = r * theta.sin();
            x[(2, j)] = u;
            labels.push(c + 1);
        }
    }
    Dataset::new(x, labels, 3)
}

/// Per-class random split: `train_per_class` samples of every class go to the
/// training set, the rest to the test set. Both keep dataset order. The test set
/// may hold a single sample per class, so it is built for evaluation only.
pub fn split(dataset: &Dataset, train_per_class: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 1..=dataset.class_count() {
        let members = dataset.class_members(class);
        if train_per_class < 2 || train_per_class >= members.len() {
            return Err(AlprError::TrainPerClassTooLarge {
                requested: train_per_class,
                class,
                available: members.len(),
            });
        }
        let mut shuffled = members.to_vec();
        shuffled.shuffle(&mut rng);
        train.extend_from_slice(&shuffled[..train_per_class]);
        test.extend_from_slice(&shuffled[train_per_class..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(&train)?, dataset.subset_for_evaluation(&test)?))
}
