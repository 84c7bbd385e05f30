//! Two-player finite-sum games and the minibatch machinery.
//!
//! A [`GameProblem`] exposes per-sample losses and gradients for both
//! players; batch and full-dataset averages are derived from those in a fixed
//! summation order (ascending sample index), so a full-dataset minibatch
//! reproduces the full gradient bit for bit.

mod linear_quadratic;
mod toy;

pub use linear_quadratic::LinearQuadraticGame;
pub use toy::{toy_grad, toy_value, ToyGame};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vector::ParameterVector;

/// Which player a quantity belongs to. The generator minimizes its loss over
/// `theta`; the discriminator minimizes its own loss over `w` (its loss is
/// the negated objective where the game is zero-sum).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlayerRole {
    Generator,
    Discriminator,
}

/// A set of distinct sample indices. Kept sorted so batch averages have a
/// deterministic, canonical summation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiniBatch {
    indices: Vec<usize>,
}

impl MiniBatch {
    /// Validates: non-empty, all indices in `0..dataset_len`, all distinct.
    pub fn new(mut indices: Vec<usize>, dataset_len: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("minibatch must be non-empty".into()));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "minibatch indices must be distinct".into(),
            ));
        }
        if *indices.last().unwrap() >= dataset_len {
            return Err(Error::InvalidArgument(format!(
                "minibatch index {} out of range for dataset of {}",
                indices.last().unwrap(),
                dataset_len
            )));
        }
        Ok(Self { indices })
    }

    /// The whole dataset as one batch.
    pub fn full(dataset_len: usize) -> Self {
        Self {
            indices: (0..dataset_len).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// A two-player finite-sum game.
///
/// Implementors provide per-sample quantities; the trait derives batch and
/// full-dataset averages. Evaluation must be a pure function of
/// `(sample, theta, w)` so concurrent use is safe.
pub trait GameProblem: Send + Sync {
    fn name(&self) -> &str;
    fn dim_theta(&self) -> usize;
    fn dim_w(&self) -> usize;
    fn dataset_len(&self) -> usize;

    fn loss_g_sample(&self, sample: usize, theta: &ParameterVector, w: &ParameterVector) -> f64;
    fn loss_d_sample(&self, sample: usize, theta: &ParameterVector, w: &ParameterVector) -> f64;
    fn grad_g_sample(
        &self,
        sample: usize,
        theta: &ParameterVector,
        w: &ParameterVector,
    ) -> ParameterVector;
    fn grad_d_sample(
        &self,
        sample: usize,
        theta: &ParameterVector,
        w: &ParameterVector,
    ) -> ParameterVector;

    /// A point where both full gradients vanish, if one is known in closed
    /// form.
    fn known_lne(&self) -> Option<(ParameterVector, ParameterVector)> {
        None
    }

    fn grad_g(
        &self,
        theta: &ParameterVector,
        w: &ParameterVector,
        batch: &MiniBatch,
    ) -> ParameterVector {
        average_grads(batch.indices(), |i| self.grad_g_sample(i, theta, w))
    }

    fn grad_d(
        &self,
        theta: &ParameterVector,
        w: &ParameterVector,
        batch: &MiniBatch,
    ) -> ParameterVector {
        average_grads(batch.indices(), |i| self.grad_d_sample(i, theta, w))
    }

    fn loss_g(&self, theta: &ParameterVector, w: &ParameterVector, batch: &MiniBatch) -> f64 {
        average_scalars(batch.indices(), |i| self.loss_g_sample(i, theta, w))
    }

    fn loss_d(&self, theta: &ParameterVector, w: &ParameterVector, batch: &MiniBatch) -> f64 {
        average_scalars(batch.indices(), |i| self.loss_d_sample(i, theta, w))
    }

    fn full_grad_g(&self, theta: &ParameterVector, w: &ParameterVector) -> ParameterVector {
        self.grad_g(theta, w, &MiniBatch::full(self.dataset_len()))
    }

    fn full_grad_d(&self, theta: &ParameterVector, w: &ParameterVector) -> ParameterVector {
        self.grad_d(theta, w, &MiniBatch::full(self.dataset_len()))
    }

    fn full_loss_g(&self, theta: &ParameterVector, w: &ParameterVector) -> f64 {
        self.loss_g(theta, w, &MiniBatch::full(self.dataset_len()))
    }

    fn full_loss_d(&self, theta: &ParameterVector, w: &ParameterVector) -> f64 {
        self.loss_d(theta, w, &MiniBatch::full(self.dataset_len()))
    }
}

fn average_grads(
    indices: &[usize],
    mut grad: impl FnMut(usize) -> ParameterVector,
) -> ParameterVector {
    let mut it = indices.iter();
    let first = grad(*it.next().expect("minibatch is non-empty"));
    let mut sum: Vec<f64> = first.as_slice().to_vec();
    for &i in it {
        let g = grad(i);
        for (s, v) in sum.iter_mut().zip(g.as_slice()) {
            *s += v;
        }
    }
    let inv = 1.0 / indices.len() as f64;
    for s in sum.iter_mut() {
        *s *= inv;
    }
    ParameterVector::new(sum).expect("per-sample gradients are finite")
}

fn average_scalars(indices: &[usize], mut f: impl FnMut(usize) -> f64) -> f64 {
    let sum: f64 = indices.iter().map(|&i| f(i)).sum();
    sum / indices.len() as f64
}

/// The stochastic gradient a player sees for a given batch.
pub fn minibatch_grad<P: GameProblem + ?Sized>(
    problem: &P,
    role: PlayerRole,
    theta: &ParameterVector,
    w: &ParameterVector,
    batch: &MiniBatch,
) -> ParameterVector {
    match role {
        PlayerRole::Generator => problem.grad_g(theta, w, batch),
        PlayerRole::Discriminator => problem.grad_d(theta, w, batch),
    }
}

/// Epoch-based without-replacement batch source.
///
/// Each epoch is a fresh seeded permutation of the dataset, consumed in
/// chunks of the requested size; a partial chunk at the end of an epoch is
/// dropped, so batches within an epoch are pairwise disjoint. The same seed
/// and stream always produce the same index sequence.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    dataset_len: usize,
    rng: ChaCha8Rng,
    perm: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    pub fn new(dataset_len: usize, seed: u64) -> Result<Self> {
        Self::with_stream(dataset_len, seed, 0)
    }

    /// Independent stream under the same seed. The solver gives the
    /// discriminator stream 0 and the generator stream 1.
    pub fn with_stream(dataset_len: usize, seed: u64, stream: u64) -> Result<Self> {
        if dataset_len == 0 {
            return Err(Error::InvalidArgument("dataset must be non-empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut perm: Vec<usize> = (0..dataset_len).collect();
        perm.shuffle(&mut rng);
        Ok(Self {
            dataset_len,
            rng,
            perm,
            cursor: 0,
        })
    }

    pub fn dataset_len(&self) -> usize {
        self.dataset_len
    }

    /// Next batch of exactly `m` indices. `m` must be in `1..=dataset_len`.
    pub fn next_batch(&mut self, m: usize) -> Result<MiniBatch> {
        if m == 0 || m > self.dataset_len {
            return Err(Error::InvalidArgument(format!(
                "batch size {m} not in 1..={}",
                self.dataset_len
            )));
        }
        if self.cursor + m > self.dataset_len {
            self.perm.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let chunk = self.perm[self.cursor..self.cursor + m].to_vec();
        self.cursor += m;
        MiniBatch::new(chunk, self.dataset_len)
    }
}

/// Central finite difference `(f(x + h) - f(x - h)) / (2h)`.
pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Compares both players' full analytic gradients against central finite
/// differences of the full losses, coordinate by coordinate. Returns the
/// worst relative error `|fd - g| / max(1, |fd|, |g|)`.
pub fn check_gradient<P: GameProblem + ?Sized>(
    problem: &P,
    theta: &ParameterVector,
    w: &ParameterVector,
    h: f64,
) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be > 0, got {h}"
        )));
    }
    let mut worst = 0.0f64;
    let mut record = |fd: f64, an: f64| {
        let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1.0);
        worst = worst.max(err);
    };

    let grad_g = problem.full_grad_g(theta, w);
    for j in 0..theta.dim() {
        let fd = central_difference(
            |x| {
                let mut t = theta.as_slice().to_vec();
                t[j] = x;
                let t = ParameterVector::new(t).expect("perturbed iterate is finite");
                problem.full_loss_g(&t, w)
            },
            theta.as_slice()[j],
            h,
        );
        record(fd, grad_g.as_slice()[j]);
    }

    let grad_d = problem.full_grad_d(theta, w);
    for j in 0..w.dim() {
        let fd = central_difference(
            |x| {
                let mut v = w.as_slice().to_vec();
                v[j] = x;
                let v = ParameterVector::new(v).expect("perturbed iterate is finite");
                problem.full_loss_d(theta, &v)
            },
            w.as_slice()[j],
            h,
        );
        record(fd, grad_d.as_slice()[j]);
    }
    Ok(worst)
}
