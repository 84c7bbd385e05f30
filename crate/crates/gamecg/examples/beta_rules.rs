//! Every conjugacy rule evaluated on one shared gradient history, under each
//! of the three clipping modes.
//!
//! The raw column is the textbook formula value (sign included); `clamp`
//! forces it into [0, 1/2], the bounded-weight condition the convergence
//! theory needs; `clamp * n^-eta` additionally decays the weight so its
//! running average vanishes. Degenerate histories (first step, orthogonal
//! updates) hit the denominator guard and yield exactly zero, never NaN.
//!
//!     cargo run --example beta_rules

use gamecg::beta::{compute_beta, BetaInputs, BetaKind, BetaRule, ClipMode};
use gamecg::vector::ParameterVector;

const RULES: [BetaKind; 9] = [
    BetaKind::Zero,
    BetaKind::Constant(0.9),
    BetaKind::FletcherReeves,
    BetaKind::PolakRibiere,
    BetaKind::HestenesStiefel,
    BetaKind::DaiYuan,
    BetaKind::HagerZhang { mu: 0.5 },
    BetaKind::HybridHsDy,
    BetaKind::HybridFrPrp,
];

fn main() -> gamecg::Result<()> {
    let g_curr = ParameterVector::new(vec![0.9, -0.3, 0.2])?;
    let g_prev = ParameterVector::new(vec![1.1, -0.1, 0.4])?;
    let d_prev = ParameterVector::new(vec![-1.0, 0.2, -0.5])?;
    let inputs = BetaInputs::new(&g_curr, &g_prev, &d_prev, 10)?;

    println!(
        "history at step n = 10: |g_n| = {:.4}, |g_(n-1)| = {:.4}, |d_(n-1)| = {:.4}",
        g_curr.norm(),
        g_prev.norm(),
        d_prev.norm()
    );
    println!();
    println!(
        "{:<10} {:>10} {:>14} {:>16}",
        "rule", "raw", "clamp[0,1/2]", "clamp * n^-0.5"
    );
    for kind in RULES {
        let raw = compute_beta(&BetaRule::new(kind, ClipMode::Raw)?, &inputs)?;
        let clamped = compute_beta(&BetaRule::new(kind, ClipMode::ClampHalf)?, &inputs)?;
        let decayed = compute_beta(
            &BetaRule::new(kind, ClipMode::ClampHalfPowerDecay { eta: 0.5 })?,
            &inputs,
        )?;
        println!("{:<10} {raw:>10.4} {clamped:>14.4} {decayed:>16.4}", kind.to_string());
    }

    // On the very first step the gradient history is all zeros, so every
    // adaptive formula divides by (numerically) nothing and returns 0.
    let zero = ParameterVector::zeros(3);
    let first_step = BetaInputs::new(&g_curr, &zero, &zero, 1)?;
    println!();
    for kind in &RULES[2..] {
        let b = compute_beta(&BetaRule::new(*kind, ClipMode::Raw)?, &first_step)?;
        assert_eq!(b, 0.0);
    }
    println!("first step (zero history): every adaptive rule returns exactly 0");

    // d_(n-1) orthogonal to y = g_n - g_(n-1) zeroes the HS/DY/HZ denominator.
    let e1 = ParameterVector::new(vec![1.0, 0.0, 0.0])?;
    let e2 = ParameterVector::new(vec![0.0, 1.0, 0.0])?;
    let twice = ParameterVector::new(vec![2.0, 0.0, 0.0])?;
    let orthogonal = BetaInputs::new(&twice, &e1, &e2, 10)?;
    for kind in [
        BetaKind::HestenesStiefel,
        BetaKind::DaiYuan,
        BetaKind::HagerZhang { mu: 0.5 },
    ] {
        let b = compute_beta(&BetaRule::new(kind, ClipMode::Raw)?, &orthogonal)?;
        assert_eq!(b, 0.0);
    }
    println!("orthogonal history:        HS, DY and HZ return exactly 0");
    Ok(())
}
