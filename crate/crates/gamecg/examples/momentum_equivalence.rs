//! The degenerate conjugacy rules recover the classical methods exactly:
//! `beta = 0` is plain SGD and `beta = c` is heavy-ball momentum.
//!
//! `momentum_replay_max_gap` reruns a constant-rate configuration with the
//! explicit two-line momentum recursion `v_n = g_n + c v_(n-1)`,
//! `x_(n+1) = x_n - a v_n` on the same minibatch stream and reports the
//! largest coordinate difference against the solver's iterates. The two
//! recursions are arithmetically identical, so the gap is exactly zero,
//! not merely small.
//!
//!     cargo run --example momentum_equivalence

use gamecg::beta::{BetaKind, BetaRule, ClipMode};
use gamecg::game::LinearQuadraticGame;
use gamecg::schedule::Schedule;
use gamecg::solver::{momentum_replay_max_gap, PlayerConfig, RunConfig};
use gamecg::vector::ParameterVector;

fn main() -> gamecg::Result<()> {
    let problem = LinearQuadraticGame::new(4, 4, 16, 3)?;
    let init = ParameterVector::new(vec![1.0; 4])?;
    let config = |rule: BetaRule| -> gamecg::Result<RunConfig> {
        let mut cfg = RunConfig::new(
            PlayerConfig::new(Schedule::constant(5e-3)?, rule, init.clone()),
            PlayerConfig::new(Schedule::constant(1e-2)?, rule, init.clone()),
            200,
        );
        cfg.seed = 7;
        cfg.batch_size = 2;
        Ok(cfg)
    };

    println!("largest |coordinate gap| between the CG solver and the classical");
    println!("recursion over 200 stochastic steps:");
    for c in [0.0, 0.3, 0.5, 0.9] {
        let rule = if c == 0.0 {
            BetaRule::zero()
        } else {
            BetaRule::constant(c)?
        };
        let gap = momentum_replay_max_gap(&problem, &config(rule)?)?;
        println!("  beta = {c:<4} max gap = {gap:e}");
    }

    // adaptive rules have no momentum counterpart, and the replay says so
    let fr = BetaRule::new(BetaKind::FletcherReeves, ClipMode::ClampHalf)?;
    let err = momentum_replay_max_gap(&problem, &config(fr)?).unwrap_err();
    println!();
    println!("asking for a Fletcher-Reeves replay fails loudly:");
    println!("  {err}");
    Ok(())
}
