//! Synthetic regression task for the enablement ladder.
//!
//! Inputs are Gaussian tokens scaled by a per-sample log-normal gain, so
//! token norms are heavy-tailed; targets come from a fixed random teacher
//! with the student's own architecture, so the task is realizable and the
//! baseline descends steadily for thousands of steps. Heavy-tailed tokens
//! are what make token-axis (Wgrad-contraction) quantization blocks
//! outlier-prone, the failure mode the ladder is built to expose; blocks
//! that run along feature axes see each token at its own scale and stay
//! well conditioned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    /// Seed of the corpus and teacher. Independent of the run's master
    /// seed so one task can be held fixed across seeds.
    pub seed: u64,
    pub train_samples: usize,
    pub val_samples: usize,
    /// Log-normal sigma of the per-sample input gain; 0 disables the
    /// base jitter.
    pub gain_sigma: f64,
    /// Probability that a sample is an outlier token.
    pub outlier_prob: f64,
    /// Extra input gain applied to outlier tokens. Such tokens saturate
    /// the teacher, so they carry little first-layer gradient signal while
    /// dominating the amax of any quantization block that runs along the
    /// token axis.
    pub outlier_gain: f64,
    /// Standard deviation of additive target noise.
    pub noise_std: f64,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train_inputs: Matrix,
    pub train_targets: Matrix,
    pub val_inputs: Matrix,
    pub val_targets: Matrix,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Matrix,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal) * std)
}

/// The fixed teacher: a tanh stack with the student's widths and a linear
/// last layer, weights slightly hotter than the student init so the target
/// function is non-trivial.
struct Teacher {
    weights: Vec<Matrix>,
}

impl Teacher {
    fn new(seed: u64, widths: &[usize]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(seed, 1));
        let weights = widths
            .windows(2)
            .map(|p| gaussian_matrix(&mut rng, p[1], p[0], 1.5 / (p[0] as f64).sqrt()))
            .collect();
        Teacher { weights }
    }

    fn predict(&self, inputs: &Matrix) -> Matrix {
        let depth = self.weights.len();
        let mut a = inputs.clone();
        for (l, w) in self.weights.iter().enumerate() {
            let z = a.matmul_nt(w).expect("teacher shapes");
            a = if l == depth - 1 { z } else { z.map(f64::tanh) };
        }
        a
    }
}

/// Generates the fixed corpus for a task with the given layer widths:
/// `x = gain * z` with `z` standard normal and `gain = exp(sigma * u)`
/// log-normal per sample, `y = teacher(x) + noise`.
pub fn generate_dataset(cfg: &DataConfig, widths: &[usize]) -> Dataset {
    let teacher = Teacher::new(cfg.seed, widths);
    let d_in = widths[0];
    let mut input_rng = ChaCha8Rng::seed_from_u64(seeding::mix(cfg.seed, 2));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seeding::mix(cfg.seed, 3));
    let mut make_inputs = |n: usize| {
        let mut x = gaussian_matrix(&mut input_rng, n, d_in, 1.0);
        for r in 0..n {
            let u: f64 = input_rng.sample(StandardNormal);
            let mut gain = (cfg.gain_sigma * u).exp();
            if input_rng.random_range(0.0..1.0) < cfg.outlier_prob {
                gain *= cfg.outlier_gain;
            }
            for v in x.row_mut(r) {
                *v *= gain;
            }
        }
        x
    };
    let train_inputs = make_inputs(cfg.train_samples);
    let val_inputs = make_inputs(cfg.val_samples);
    let mut make_targets = |inputs: &Matrix| {
        let mut y = teacher.predict(inputs);
        for v in y.data_mut() {
            *v += noise_rng.sample::<f64, _>(StandardNormal) * cfg.noise_std;
        }
        y
    };
    let train_targets = make_targets(&train_inputs);
    let val_targets = make_targets(&val_inputs);
    Dataset {
        train_inputs,
        train_targets,
        val_inputs,
        val_targets,
    }
}

/// Draws a batch of `batch_size` training rows (with replacement) from the
/// seeded stream. The same seed always selects the same rows.
pub fn sample_batch(ds: &Dataset, batch_size: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ds.train_inputs.rows();
    let d_in = ds.train_inputs.cols();
    let d_out = ds.train_targets.cols();
    let mut inputs = Matrix::zeros(batch_size, d_in);
    let mut targets = Matrix::zeros(batch_size, d_out);
    for b in 0..batch_size {
        let idx = rng.random_range(0..n);
        inputs.row_mut(b).copy_from_slice(ds.train_inputs.row(idx));
        targets.row_mut(b).copy_from_slice(ds.train_targets.row(idx));
    }
    Batch { inputs, targets }
}
