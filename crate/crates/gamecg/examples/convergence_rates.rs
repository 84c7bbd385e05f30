//! Measures the equilibrium-gap decay of the two-timescale CG solver on the
//! linear-quadratic game and fits the empirical rate by log-log least
//! squares.
//!
//! Both players run matched n^(-1/2) schedules with Fletcher-Reeves
//! conjugacy under decaying clipping, the setting whose expected gap decays
//! like N^(-1/2); the fitted slope lands near -0.5.
//!
//!     cargo run --release --example convergence_rates

use gamecg::beta::{BetaKind, BetaRule, ClipMode};
use gamecg::game::LinearQuadraticGame;
use gamecg::metrics::{fit_rate, log_spaced_checkpoints, ViAccumulator};
use gamecg::schedule::Schedule;
use gamecg::solver::{run, PlayerConfig, RunConfig};
use gamecg::vector::ParameterVector;

const STEPS: u64 = 20_000;
const SEEDS: u64 = 4;

fn main() -> gamecg::Result<()> {
    let problem = LinearQuadraticGame::new(4, 4, 4096, 1)?;
    let beta = BetaRule::new(
        BetaKind::FletcherReeves,
        ClipMode::ClampHalfPowerDecay { eta: 0.5 },
    )?;
    let ones = ParameterVector::new(vec![1.0; 4])?;
    let mut base = RunConfig::new(
        PlayerConfig::new(Schedule::power_decay(0.5, 0.5)?, beta, ones.clone()),
        PlayerConfig::new(Schedule::power_decay(0.5, 0.5)?, beta, ones),
        STEPS,
    );
    base.record_iterates = true;

    let mut acc = ViAccumulator::new(&problem, STEPS, None)?;
    for seed in 1..=SEEDS {
        let mut cfg = base.clone();
        cfg.seed = seed;
        acc.push(&run(&problem, &cfg)?)?;
    }
    let series = acc.finish()?;

    println!("seed-averaged equilibrium gaps over {SEEDS} seeds:");
    println!("{:>8} {:>12} {:>12}", "N", "|A_G(N)|", "|A_D(N)|");
    for &n in &log_spaced_checkpoints(1, STEPS, 11)? {
        let i = (n - 1) as usize;
        println!(
            "{n:>8} {:>12.4e} {:>12.4e}",
            series.gap_g[i].abs(),
            series.gap_d[i].abs()
        );
    }

    let checkpoints = log_spaced_checkpoints(1, STEPS, 40)?;
    let (points_g, points_d) = series.sampled_points(&checkpoints)?;
    let window = (100.0, STEPS as f64);
    let fit_g = fit_rate(&points_g, window)?;
    let fit_d = fit_rate(&points_d, window)?;
    println!();
    println!("log-log fit over N in [{}, {}]:", window.0, window.1);
    println!(
        "  generator:     slope {:+.3}, r^2 {:.3} ({} points)",
        fit_g.slope, fit_g.r_squared, fit_g.points_used
    );
    println!(
        "  discriminator: slope {:+.3}, r^2 {:.3} ({} points)",
        fit_d.slope, fit_d.r_squared, fit_d.points_used
    );
    Ok(())
}
