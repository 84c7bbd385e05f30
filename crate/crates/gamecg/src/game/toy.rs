//! The 2-D saddle problem `min_x max_y (1 + x^2)(100 - y^2)`.
//!
//! Its unique local Nash equilibrium is the origin, where the objective is
//! exactly 100. The problem is deterministic; an optional centered per-sample
//! perturbation of the gradients turns it into a finite sum so the stochastic
//! machinery can be exercised in two dimensions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::GameProblem;
use crate::error::{Error, Result};
use crate::vector::ParameterVector;

/// `f(x, y) = (1 + x^2)(100 - y^2)`.
pub fn toy_value(x: f64, y: f64) -> f64 {
    (1.0 + x * x) * (100.0 - y * y)
}

/// `(df/dx, df/dy) = (2x(100 - y^2), -2y(1 + x^2))`.
pub fn toy_grad(x: f64, y: f64) -> (f64, f64) {
    (2.0 * x * (100.0 - y * y), -2.0 * y * (1.0 + x * x))
}

/// The toy saddle game. `x` is the generator parameter (minimizes `f`),
/// `y` the discriminator parameter (maximizes `f`, i.e. minimizes `-f`).
#[derive(Clone, Debug)]
pub struct ToyGame {
    /// Per-sample additive gradient offsets `(dx_i, dy_i)`, each column
    /// centered so the full gradient equals the deterministic one exactly.
    offsets: Vec<(f64, f64)>,
}

impl ToyGame {
    /// The deterministic problem: a single sample with zero offset.
    pub fn new() -> Self {
        Self {
            offsets: vec![(0.0, 0.0)],
        }
    }

    /// A stochastic variant: `dataset_len` samples whose gradient offsets are
    /// drawn uniformly with standard deviation about `sigma`, then centered
    /// column-wise. `sigma = 0` reduces to the deterministic problem.
    pub fn with_noise(sigma: f64, dataset_len: usize, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise level must be >= 0, got {sigma}"
            )));
        }
        if dataset_len < 2 {
            return Err(Error::InvalidArgument(
                "noisy toy game needs at least 2 samples".into(),
            ));
        }
        if sigma == 0.0 {
            return Ok(Self::new());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half_width = sigma * 3.0f64.sqrt();
        let mut offsets: Vec<(f64, f64)> = (0..dataset_len)
            .map(|_| {
                (
                    rng.gen_range(-half_width..half_width),
                    rng.gen_range(-half_width..half_width),
                )
            })
            .collect();
        let n = dataset_len as f64;
        let mean_x: f64 = offsets.iter().map(|o| o.0).sum::<f64>() / n;
        let mean_y: f64 = offsets.iter().map(|o| o.1).sum::<f64>() / n;
        for o in offsets.iter_mut() {
            o.0 -= mean_x;
            o.1 -= mean_y;
        }
        Ok(Self { offsets })
    }
}

impl Default for ToyGame {
    fn default() -> Self {
        Self::new()
    }
}

impl GameProblem for ToyGame {
    fn name(&self) -> &str {
        "toy"
    }

    fn dim_theta(&self) -> usize {
        1
    }

    fn dim_w(&self) -> usize {
        1
    }

    fn dataset_len(&self) -> usize {
        self.offsets.len()
    }

    fn loss_g_sample(&self, sample: usize, theta: &ParameterVector, w: &ParameterVector) -> f64 {
        let (x, y) = (theta.as_slice()[0], w.as_slice()[0]);
        toy_value(x, y) + self.offsets[sample].0 * x
    }

    fn loss_d_sample(&self, sample: usize, theta: &ParameterVector, w: &ParameterVector) -> f64 {
        let (x, y) = (theta.as_slice()[0], w.as_slice()[0]);
        -toy_value(x, y) + self.offsets[sample].1 * y
    }

    fn grad_g_sample(
        &self,
        sample: usize,
        theta: &ParameterVector,
        w: &ParameterVector,
    ) -> ParameterVector {
        let (x, y) = (theta.as_slice()[0], w.as_slice()[0]);
        let (fx, _) = toy_grad(x, y);
        ParameterVector::new(vec![fx + self.offsets[sample].0])
            .expect("toy gradient is finite")
    }

    fn grad_d_sample(
        &self,
        sample: usize,
        theta: &ParameterVector,
        w: &ParameterVector,
    ) -> ParameterVector {
        let (x, y) = (theta.as_slice()[0], w.as_slice()[0]);
        let (_, fy) = toy_grad(x, y);
        ParameterVector::new(vec![-fy + self.offsets[sample].1])
            .expect("toy gradient is finite")
    }

    fn known_lne(&self) -> Option<(ParameterVector, ParameterVector)> {
        Some((
            ParameterVector::new(vec![0.0]).expect("origin"),
            ParameterVector::new(vec![0.0]).expect("origin"),
        ))
    }
}
