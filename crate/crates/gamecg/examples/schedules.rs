//! Learning-rate schedules and the two-timescale regimes their pairs fall
//! into.
//!
//! The solver takes any pair of schedules; `validate_timescales` reports
//! which convergence guarantee (if any) covers the combination.
//!
//!     cargo run --example schedules

use gamecg::schedule::{validate_timescales, Schedule};

fn main() -> gamecg::Result<()> {
    let schedules = [
        Schedule::constant(1e-2)?,
        Schedule::power_decay(1e-2, 0.5)?,
        Schedule::power_decay(1e-2, 0.8)?,
        Schedule::step_decay(1e-2, 0.5, 100)?,
    ];

    print!("{:<16}", "n");
    for s in &schedules {
        print!(" {:>16}", s.to_string());
    }
    println!();
    for n in [1u64, 10, 100, 1_000, 10_000] {
        print!("{n:<16}");
        for s in &schedules {
            print!(" {:>16.4e}", s.rate_at(n));
        }
        println!();
    }

    println!();
    let pairs = [
        (Schedule::constant(1e-3)?, Schedule::constant(1e-2)?),
        (Schedule::power_decay(1e-3, 0.5)?, Schedule::power_decay(1e-2, 0.5)?),
        (Schedule::power_decay(1e-3, 0.8)?, Schedule::power_decay(1e-2, 0.6)?),
        (Schedule::step_decay(1e-3, 0.9, 500)?, Schedule::step_decay(1e-2, 0.9, 500)?),
        (Schedule::power_decay(1e-3, 0.6)?, Schedule::power_decay(1e-2, 0.8)?),
    ];
    for (g, d) in &pairs {
        println!("generator {g}, discriminator {d}");
        println!("  -> {}", validate_timescales(g, d));
    }
    Ok(())
}
