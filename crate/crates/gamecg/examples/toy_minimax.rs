//! The deterministic saddle warm-up: `min_x max_y (1 + x^2)(100 - y^2)`.
//!
//! Reproduces the canonical comparison of plain SGD, heavy-ball momentum and
//! Fletcher-Reeves conjugate gradients from the starting point (0.5, 9.0),
//! each under a constant and a 1/sqrt(n) learning-rate schedule. All six runs
//! drift toward the equilibrium at the origin, the iterate norm decreasing
//! almost monotonically along the way.
//!
//!     cargo run --example toy_minimax

use gamecg::config::ToyStudySpec;
use gamecg::experiment::report_toy;
use gamecg::game::toy_value;

fn main() -> gamecg::Result<()> {
    let spec = ToyStudySpec {
        steps: 400,
        init: (0.5, 9.0),
        output_dir: std::env::temp_dir().join("gamecg-toy-minimax"),
    };
    let (x0, y0) = spec.init;
    println!("objective at the start:       f({x0}, {y0}) = {:.4}", toy_value(x0, y0));
    println!("objective at the equilibrium: f(0, 0)    = {:.4}", toy_value(0.0, 0.0));
    println!();

    let lines = report_toy(&spec)?;
    println!(
        "{:<10} {:<6} {:>10} {:>10} {:>12} {:>12} {:>8}",
        "method", "rates", "|z_0|", "|z_N|", "|f_0 - 100|", "|f_N - 100|", "mono"
    );
    for l in &lines {
        println!(
            "{:<10} {:<6} {:>10.4} {:>10.4} {:>12.4e} {:>12.4e} {:>7.1}%",
            l.method,
            l.schedule,
            l.initial_distance,
            l.final_distance,
            l.initial_objective_gap,
            l.final_objective_gap,
            100.0 * l.norm_nonincreasing_fraction
        );
    }
    println!();
    println!("z = (x, y); `mono` is the fraction of steps whose |z| did not increase.");
    println!("Per-step traces and toy_report.csv: {}", spec.output_dir.display());
    Ok(())
}
