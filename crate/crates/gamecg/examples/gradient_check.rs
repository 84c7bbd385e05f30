//! Validates the analytic gradients and the minibatch plumbing.
//!
//! Three checks: central finite differences against both players' gradients
//! at random points, the closed-form equilibrium of the linear-quadratic
//! game (both full gradients vanish there), and exact consistency between
//! minibatch averages and the full-dataset gradient.
//!
//!     cargo run --example gradient_check

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gamecg::game::{check_gradient, GameProblem, LinearQuadraticGame, MiniBatch, ToyGame};
use gamecg::vector::ParameterVector;

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> gamecg::Result<ParameterVector> {
    ParameterVector::new((0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
}

fn main() -> gamecg::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    let problems: Vec<(&str, Box<dyn GameProblem>)> = vec![
        ("toy, sigma = 0.4", Box::new(ToyGame::with_noise(0.4, 12, 9)?)),
        ("linear-quadratic 5x3", Box::new(LinearQuadraticGame::new(5, 3, 24, 7)?)),
    ];
    println!("finite differences vs analytic gradients (10 random points each):");
    for (label, problem) in &problems {
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let theta = random_point(&mut rng, problem.dim_theta())?;
            let w = random_point(&mut rng, problem.dim_w())?;
            worst = worst.max(check_gradient(problem.as_ref(), &theta, &w, 1e-5)?);
        }
        println!("  {label:<22} worst relative error {worst:.3e}");
    }

    let lq = LinearQuadraticGame::new(4, 4, 64, 1)?;
    let (theta_star, w_star) = lq.known_lne().expect("closed-form equilibrium");
    println!();
    println!("full gradient norms at the closed-form equilibrium:");
    println!(
        "  |grad_g| = {:.3e}, |grad_d| = {:.3e}",
        lq.full_grad_g(&theta_star, &w_star).norm(),
        lq.full_grad_d(&theta_star, &w_star).norm()
    );

    // batch averages are plain means, so averaging every size-2 minibatch of
    // a 6-sample dataset reproduces the full gradient
    let small = LinearQuadraticGame::new(4, 2, 6, 21)?;
    let theta = random_point(&mut rng, 4)?;
    let w = random_point(&mut rng, 2)?;
    let full = small.full_grad_g(&theta, &w);
    let mut sums = [0.0f64; 4];
    let mut count = 0usize;
    for i in 0..6 {
        for j in (i + 1)..6 {
            let g = small.grad_g(&theta, &w, &MiniBatch::new(vec![i, j], 6)?);
            for (s, v) in sums.iter_mut().zip(g.as_slice()) {
                *s += v;
            }
            count += 1;
        }
    }
    let worst = sums
        .iter()
        .zip(full.as_slice())
        .map(|(s, f)| (s / count as f64 - f).abs() / f.abs().max(1.0))
        .fold(0.0f64, f64::max);
    println!();
    println!("mean over all {count} size-2 minibatches vs the full gradient:");
    println!("  worst relative deviation {worst:.3e}");
    Ok(())
}
