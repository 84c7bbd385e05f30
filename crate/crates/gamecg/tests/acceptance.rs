//! The acceptance gate: ten end-to-end checks covering the toy study, the
//! empirical gap-decay rates in every schedule regime, conjugacy-rule
//! clipping, the SGD/momentum equivalences, gradient correctness, the
//! equilibrium oracle and minibatch unbiasedness. Each test prints one
//! `[criterion N] PASS` line with its measured numbers (visible under
//! `--nocapture`); the test name doubles as the pass/fail line in the
//! default harness output.
//!
//! The long rate studies serialize through a mutex so their wall-time
//! budgets are measured without cross-test contention.

use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use gamecg::beta::{compute_beta, BetaInputs, BetaKind, BetaRule, ClipMode};
use gamecg::config::ToyStudySpec;
use gamecg::experiment::report_toy;
use gamecg::game::{
    check_gradient, BatchSampler, GameProblem, LinearQuadraticGame, MiniBatch, ToyGame,
};
use gamecg::metrics::{fit_rate, log_spaced_checkpoints, ViAccumulator, ViSeries};
use gamecg::schedule::Schedule;
use gamecg::solver::{momentum_replay_max_gap, run, PlayerConfig, RunConfig};
use gamecg::vector::ParameterVector;

static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_lock() -> MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

fn pv(values: Vec<f64>) -> ParameterVector {
    ParameterVector::new(values).unwrap()
}

fn ones(dim: usize) -> ParameterVector {
    pv(vec![1.0; dim])
}

fn fr_decay(eta: f64) -> BetaRule {
    BetaRule::new(
        BetaKind::FletcherReeves,
        ClipMode::ClampHalfPowerDecay { eta },
    )
    .unwrap()
}

fn rand_pv(rng: &mut ChaCha8Rng, dim: usize, half_width: f64) -> ParameterVector {
    pv((0..dim)
        .map(|_| rng.gen_range(-half_width..half_width))
        .collect())
}

/// Runs the base config once per seed and folds the traces into one
/// seed-averaged gap series.
fn vi_over_seeds(
    problem: &LinearQuadraticGame,
    base: &RunConfig,
    seeds: std::ops::RangeInclusive<u64>,
) -> ViSeries {
    let mut acc = ViAccumulator::new(problem, base.steps, None).unwrap();
    for seed in seeds {
        let mut cfg = base.clone();
        cfg.seed = seed;
        let trace = run(problem, &cfg).unwrap();
        acc.push(&trace).unwrap();
    }
    acc.finish().unwrap()
}

const RATE_STEPS: u64 = 100_000;
const RATE_CHECKPOINTS: usize = 40;

#[test]
fn criterion_01_toy_study_converges_for_all_three_methods() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let spec = ToyStudySpec {
        steps: 400,
        init: (0.5, 9.0),
        output_dir: dir.path().to_path_buf(),
    };
    let lines = report_toy(&spec).unwrap();
    assert_eq!(lines.len(), 6, "three methods x two schedules");
    for l in &lines {
        let tag = format!("{}/{}", l.method, l.schedule);
        assert!(
            l.final_distance < l.initial_distance,
            "{tag}: distance to the equilibrium grew ({} -> {})",
            l.initial_distance,
            l.final_distance
        );
        assert!(
            l.norm_nonincreasing_fraction >= 0.9,
            "{tag}: iterate norm non-increasing in only {:.1}% of steps",
            100.0 * l.norm_nonincreasing_fraction
        );
        assert!(
            l.final_objective_gap < l.initial_objective_gap,
            "{tag}: |f - 100| grew ({} -> {})",
            l.initial_objective_gap,
            l.final_objective_gap
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "toy study took {elapsed:.2}s, budget 1s");
    let worst = lines
        .iter()
        .map(|l| l.norm_nonincreasing_fraction)
        .fold(f64::INFINITY, f64::min);
    println!(
        "[criterion 1] PASS: 6/6 runs shrink distance and objective gap, \
         worst norm-nonincreasing fraction {worst:.3} >= 0.9, {elapsed:.2}s < 1s"
    );
}

#[test]
fn criterion_02_matched_sqrt_schedules_decay_like_inverse_sqrt() {
    let _guard = heavy_lock();
    let start = Instant::now();
    let problem = LinearQuadraticGame::new(4, 4, 4096, 1).unwrap();
    let base = RunConfig {
        seed: 0,
        steps: RATE_STEPS,
        batch_size: 1,
        generator: PlayerConfig::new(
            Schedule::power_decay(0.5, 0.5).unwrap(),
            fr_decay(0.5),
            ones(4),
        ),
        discriminator: PlayerConfig::new(
            Schedule::power_decay(0.5, 0.5).unwrap(),
            fr_decay(0.5),
            ones(4),
        ),
        trace_stride: 1,
        record_iterates: true,
    };
    let series = vi_over_seeds(&problem, &base, 1..=10);
    let checkpoints = log_spaced_checkpoints(1, RATE_STEPS, RATE_CHECKPOINTS).unwrap();
    let (points_g, points_d) = series.sampled_points(&checkpoints).unwrap();
    let window = (1e2, 1e5);
    let fit_g = fit_rate(&points_g, window).unwrap();
    let fit_d = fit_rate(&points_d, window).unwrap();
    for (who, fit) in [("generator", &fit_g), ("discriminator", &fit_d)] {
        assert!(
            fit.points_used >= 20,
            "{who}: only {} log-spaced points in the fit window",
            fit.points_used
        );
        assert!(
            (-0.65..=-0.35).contains(&fit.slope),
            "{who} slope {:.4} outside [-0.65, -0.35]",
            fit.slope
        );
        assert!(
            fit.r_squared >= 0.9,
            "{who} r^2 {:.4} below 0.9",
            fit.r_squared
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "rate study took {elapsed:.1}s, budget 120s");
    println!(
        "[criterion 2] PASS: slope_G {:.3}, slope_D {:.3} in [-0.65, -0.35]; \
         r^2 {:.4}/{:.4} >= 0.9; {}/{} points; {elapsed:.1}s < 120s",
        fit_g.slope, fit_d.slope, fit_g.r_squared, fit_d.r_squared,
        fit_g.points_used, fit_d.points_used
    );
}

#[test]
fn criterion_03_split_exponents_decay_at_their_predicted_rates() {
    let _guard = heavy_lock();
    let start = Instant::now();
    let problem = LinearQuadraticGame::new(4, 4, 4096, 1).unwrap();
    let base = RunConfig {
        seed: 0,
        steps: RATE_STEPS,
        batch_size: 1,
        generator: PlayerConfig::new(
            Schedule::power_decay(0.05, 0.8).unwrap(),
            fr_decay(0.8),
            ones(4),
        ),
        discriminator: PlayerConfig::new(
            Schedule::power_decay(0.0075, 0.6).unwrap(),
            fr_decay(0.6),
            ones(4),
        ),
        trace_stride: 1,
        record_iterates: true,
    };
    let series = vi_over_seeds(&problem, &base, 1..=10);
    let checkpoints = log_spaced_checkpoints(1, RATE_STEPS, RATE_CHECKPOINTS).unwrap();
    let (points_g, points_d) = series.sampled_points(&checkpoints).unwrap();
    let window = (1e2, 1e5);
    let fit_g = fit_rate(&points_g, window).unwrap();
    let fit_d = fit_rate(&points_d, window).unwrap();
    // min(eta, 1 - eta): 0.2 for the generator (eta_a = 0.8), 0.4 for the
    // discriminator (eta_b = 0.6), each within +/- 0.15
    assert!(
        (-0.35..=-0.05).contains(&fit_g.slope),
        "generator slope {:.4} outside -0.2 +/- 0.15",
        fit_g.slope
    );
    assert!(
        (-0.55..=-0.25).contains(&fit_d.slope),
        "discriminator slope {:.4} outside -0.4 +/- 0.15",
        fit_d.slope
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "rate study took {elapsed:.1}s, budget 120s");
    println!(
        "[criterion 3] PASS: slope_G {:.3} (target -0.2 +/- 0.15), \
         slope_D {:.3} (target -0.4 +/- 0.15); r^2 {:.3}/{:.3}; {elapsed:.1}s < 120s",
        fit_g.slope, fit_d.slope, fit_g.r_squared, fit_d.r_squared
    );
}

#[test]
fn criterion_04_constant_rate_plateau_scales_linearly_with_the_rate() {
    let _guard = heavy_lock();
    let start = Instant::now();
    let problem = LinearQuadraticGame::new(4, 4, 2048, 1).unwrap();
    let rates = [1e-2, 5e-3, 2.5e-3];
    let mut plateaus = Vec::new();
    for &rate in &rates {
        let base = RunConfig {
            seed: 0,
            steps: RATE_STEPS,
            batch_size: 1,
            generator: PlayerConfig::new(
                Schedule::constant(rate).unwrap(),
                BetaRule::zero(),
                ParameterVector::zeros(4),
            ),
            discriminator: PlayerConfig::new(
                Schedule::constant(rate).unwrap(),
                BetaRule::zero(),
                ParameterVector::zeros(4),
            ),
            trace_stride: 1,
            record_iterates: true,
        };
        let series = vi_over_seeds(&problem, &base, 1..=4);
        plateaus.push(series.gap_g.last().copied().unwrap().abs());
    }
    assert!(
        plateaus[0] > plateaus[1] && plateaus[1] > plateaus[2],
        "plateaus {plateaus:?} not monotone in the rate"
    );
    let ratios = [plateaus[1] / plateaus[0], plateaus[2] / plateaus[1]];
    for (i, r) in ratios.iter().enumerate() {
        assert!(
            (0.3..=0.8).contains(r),
            "halving {} -> {} changed the plateau by {r:.3}, outside [0.3, 0.8]",
            rates[i],
            rates[i + 1]
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 180.0, "floor study took {elapsed:.1}s, budget 180s");
    println!(
        "[criterion 4] PASS: plateaus {:.3e}/{:.3e}/{:.3e} monotone in a, \
         halving ratios {:.3}/{:.3} in [0.3, 0.8]; {elapsed:.1}s < 180s",
        plateaus[0], plateaus[1], plateaus[2], ratios[0], ratios[1]
    );
}

#[test]
fn criterion_05_step_decay_reaches_one_over_n() {
    let _guard = heavy_lock();
    let start = Instant::now();
    let problem = LinearQuadraticGame::new(4, 4, 64, 1).unwrap();
    let base = RunConfig {
        seed: 0,
        steps: RATE_STEPS,
        batch_size: 1,
        generator: PlayerConfig::new(
            Schedule::step_decay(1e-2, 0.9, 500).unwrap(),
            BetaRule::zero(),
            ones(4),
        ),
        discriminator: PlayerConfig::new(
            Schedule::step_decay(1e-2, 0.9, 500).unwrap(),
            BetaRule::zero(),
            ones(4),
        ),
        trace_stride: 1,
        record_iterates: true,
    };
    let series = vi_over_seeds(&problem, &base, 1..=3);
    let checkpoints = log_spaced_checkpoints(1, RATE_STEPS, RATE_CHECKPOINTS).unwrap();
    let (points_g, points_d) = series.sampled_points(&checkpoints).unwrap();
    let fit_g = fit_rate(&points_g, (1e3, 1e5)).unwrap();
    let fit_d = fit_rate(&points_d, (1e3, 1e5)).unwrap();
    assert!(
        fit_g.slope <= -0.8,
        "generator slope {:.4} above -0.8",
        fit_g.slope
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "rate study took {elapsed:.1}s, budget 120s");
    println!(
        "[criterion 5] PASS: slope_G {:.3} <= -0.8 (slope_D {:.3}), \
         r^2 {:.4}; {elapsed:.1}s < 120s",
        fit_g.slope, fit_d.slope, fit_g.r_squared
    );
}

const ADAPTIVE_RULES: [BetaKind; 7] = [
    BetaKind::FletcherReeves,
    BetaKind::PolakRibiere,
    BetaKind::HestenesStiefel,
    BetaKind::DaiYuan,
    BetaKind::HagerZhang { mu: 0.5 },
    BetaKind::HybridHsDy,
    BetaKind::HybridFrPrp,
];

#[test]
fn criterion_06_clipping_bounds_every_rule_and_guards_zero_denominators() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let scales = [1e-18, 1e-9, 1.0, 1e9, 1e18];
    let draw = |rng: &mut ChaCha8Rng| {
        let scale = scales[rng.gen_range(0..scales.len())];
        pv((0..6)
            .map(|_| rng.gen_range(-1.0f64..1.0) * scale)
            .collect())
    };
    for case in 0..10_000 {
        let g = draw(&mut rng);
        let gp = draw(&mut rng);
        let dp = draw(&mut rng);
        let n = rng.gen_range(1..=1_000_000u64);
        let inputs = BetaInputs::new(&g, &gp, &dp, n).unwrap();
        for kind in ADAPTIVE_RULES {
            let rule = BetaRule::new(kind, ClipMode::ClampHalf).unwrap();
            let b = compute_beta(&rule, &inputs).unwrap();
            assert!(
                (0.0..=0.5).contains(&b),
                "case {case}: {kind} produced {b} outside [0, 1/2]"
            );
        }
    }

    // per-rule zero-denominator constructions must yield exactly 0, clipped
    // or not: a zero previous gradient kills the FR/PRP denominator, and a
    // previous direction orthogonal to y = g - g_prev kills HS/DY/HZ
    let zero = pv(vec![0.0; 3]);
    let e1 = pv(vec![1.0, 0.0, 0.0]);
    let e1_twice = pv(vec![2.0, 0.0, 0.0]);
    let e2 = pv(vec![0.0, 1.0, 0.0]);
    for clip in [ClipMode::ClampHalf, ClipMode::Raw] {
        for kind in ADAPTIVE_RULES {
            let rule = BetaRule::new(kind, clip).unwrap();
            let dead_history =
                compute_beta(&rule, &BetaInputs::new(&e1, &zero, &zero, 5).unwrap()).unwrap();
            assert_eq!(dead_history, 0.0, "{kind} {clip:?} with zero history");
            let orthogonal =
                compute_beta(&rule, &BetaInputs::new(&e1_twice, &e1, &e2, 5).unwrap()).unwrap();
            match kind {
                BetaKind::HestenesStiefel
                | BetaKind::DaiYuan
                | BetaKind::HagerZhang { .. }
                | BetaKind::HybridHsDy => {
                    assert_eq!(orthogonal, 0.0, "{kind} {clip:?} with <d, y> = 0")
                }
                _ => assert!(orthogonal.is_finite()),
            }
            let flat = compute_beta(&rule, &BetaInputs::new(&e1, &e1, &e2, 5).unwrap()).unwrap();
            match kind {
                BetaKind::HestenesStiefel
                | BetaKind::DaiYuan
                | BetaKind::HagerZhang { .. }
                | BetaKind::HybridHsDy => {
                    assert_eq!(flat, 0.0, "{kind} {clip:?} with y = 0")
                }
                _ => assert!(!flat.is_nan()),
            }
        }
    }
    println!(
        "[criterion 6] PASS: 10000 random inputs x 7 rules stay in [0, 1/2] \
         under clipping; zero-denominator constructions return exactly 0"
    );
}

#[test]
fn criterion_07_sgd_and_momentum_are_exact_special_cases() {
    let problem = LinearQuadraticGame::new(4, 4, 16, 3).unwrap();
    let (a, b) = (5e-3, 1e-2);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let init_g = rand_pv(&mut rng, 4, 2.0);
    let init_d = rand_pv(&mut rng, 4, 2.0);
    let cfg = RunConfig {
        seed: 5,
        steps: 100,
        batch_size: 2,
        generator: PlayerConfig::new(
            Schedule::constant(a).unwrap(),
            BetaRule::zero(),
            init_g.clone(),
        ),
        discriminator: PlayerConfig::new(
            Schedule::constant(b).unwrap(),
            BetaRule::zero(),
            init_d.clone(),
        ),
        trace_stride: 1,
        record_iterates: true,
    };
    let trace = run(&problem, &cfg).unwrap();

    // independent SGD loop: same seed contract (discriminator batches from
    // stream 0, generator from stream 1, both gradients at the pre-update
    // pair), plain `x += rate * -g` updates
    let mut sampler_d = BatchSampler::with_stream(16, cfg.seed, 0).unwrap();
    let mut sampler_g = BatchSampler::with_stream(16, cfg.seed, 1).unwrap();
    let mut theta = init_g.as_slice().to_vec();
    let mut w = init_d.as_slice().to_vec();
    for n in 0..cfg.steps as usize {
        let (tv, wv) = (pv(theta.clone()), pv(w.clone()));
        let grad_d = problem.grad_d(&tv, &wv, &sampler_d.next_batch(2).unwrap());
        let grad_g = problem.grad_g(&tv, &wv, &sampler_g.next_batch(2).unwrap());
        for (x, g) in w.iter_mut().zip(grad_d.as_slice()) {
            *x += b * -g;
        }
        for (x, g) in theta.iter_mut().zip(grad_g.as_slice()) {
            *x += a * -g;
        }
        let rec = &trace.records[n + 1];
        for (ours, reference) in rec
            .theta
            .as_ref()
            .unwrap()
            .as_slice()
            .iter()
            .chain(rec.w.as_ref().unwrap().as_slice())
            .zip(theta.iter().chain(w.iter()))
        {
            assert_eq!(
                ours.to_bits(),
                reference.to_bits(),
                "step {n}: solver {ours:e} vs reference {reference:e}"
            );
        }
    }

    // the serialized trace is reproducible byte for byte
    let mut first = Vec::new();
    trace.write_csv(&mut first).unwrap();
    let mut second = Vec::new();
    run(&problem, &cfg).unwrap().write_csv(&mut second).unwrap();
    assert_eq!(first, second, "re-running the config changed the trace bytes");

    // constant-coefficient runs replay exactly as the two-line momentum
    // recursion
    for c in [0.0, 0.3, 0.5] {
        let mut momentum_cfg = cfg.clone();
        let rule = if c == 0.0 {
            BetaRule::zero()
        } else {
            BetaRule::constant(c).unwrap()
        };
        momentum_cfg.generator.beta = rule;
        momentum_cfg.discriminator.beta = rule;
        let gap = momentum_replay_max_gap(&problem, &momentum_cfg).unwrap();
        assert_eq!(gap, 0.0, "momentum replay gap {gap:e} for c = {c}");
    }
    println!(
        "[criterion 7] PASS: beta = 0 matches a plain SGD loop bit for bit \
         over 100 steps; momentum replay gap is exactly 0 for c in {{0, 0.3, 0.5}}"
    );
}

#[test]
fn criterion_08_analytic_gradients_match_finite_differences() {
    let toy = ToyGame::with_noise(0.4, 12, 9).unwrap();
    let lq = LinearQuadraticGame::new(5, 3, 24, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    for point in 0..20 {
        let (x, y) = (rand_pv(&mut rng, 1, 3.0), rand_pv(&mut rng, 1, 3.0));
        let err = check_gradient(&toy, &x, &y, 1e-5).unwrap();
        assert!(err < 1e-6, "toy point {point}: relative error {err:e}");
        worst = worst.max(err);

        let (theta, w) = (rand_pv(&mut rng, 5, 3.0), rand_pv(&mut rng, 3, 3.0));
        let err = check_gradient(&lq, &theta, &w, 1e-5).unwrap();
        assert!(err < 1e-6, "lq point {point}: relative error {err:e}");
        worst = worst.max(err);
    }
    println!(
        "[criterion 8] PASS: worst finite-difference relative error {worst:.2e} \
         < 1e-6 over 20 points per game"
    );
}

#[test]
fn criterion_09_the_solved_equilibrium_is_stationary_and_stays_put() {
    let mut worst_norm = 0.0f64;
    for (dim_theta, dim_w, len, seed) in
        [(4, 4, 64, 1), (4, 4, 64, 2), (4, 4, 64, 3), (6, 3, 32, 11), (2, 5, 16, 4)]
    {
        let game = LinearQuadraticGame::new(dim_theta, dim_w, len, seed).unwrap();
        let (theta, w) = game.known_lne().unwrap();
        let (ng, nd) = (
            game.full_grad_g(&theta, &w).norm(),
            game.full_grad_d(&theta, &w).norm(),
        );
        assert!(ng < 1e-10, "seed {seed}: ||full_grad_g|| = {ng:e}");
        assert!(nd < 1e-10, "seed {seed}: ||full_grad_d|| = {nd:e}");
        worst_norm = worst_norm.max(ng).max(nd);
    }

    // a full-batch run started at the equilibrium must not move: batch size
    // equal to the dataset makes every minibatch the exact full gradient
    let game = LinearQuadraticGame::new(4, 4, 64, 1).unwrap();
    let (theta_star, w_star) = game.known_lne().unwrap();
    let cfg = RunConfig {
        seed: 0,
        steps: 1000,
        batch_size: 64,
        generator: PlayerConfig::new(
            Schedule::constant(1e-2).unwrap(),
            BetaRule::zero(),
            theta_star.clone(),
        ),
        discriminator: PlayerConfig::new(
            Schedule::constant(1e-2).unwrap(),
            BetaRule::zero(),
            w_star.clone(),
        ),
        trace_stride: 1,
        record_iterates: true,
    };
    let trace = run(&game, &cfg).unwrap();
    let mut max_drift = 0.0f64;
    for rec in &trace.records {
        let dt = rec.theta.as_ref().unwrap().sub(&theta_star).unwrap().norm();
        let dw = rec.w.as_ref().unwrap().sub(&w_star).unwrap().norm();
        max_drift = max_drift.max((dt * dt + dw * dw).sqrt());
    }
    assert!(
        max_drift < 1e-8,
        "iterates drifted {max_drift:e} from the equilibrium over 1000 full-batch steps"
    );
    println!(
        "[criterion 9] PASS: worst equilibrium gradient norm {worst_norm:.2e} < 1e-10 \
         across 5 problems; max drift {max_drift:.2e} < 1e-8 over 1000 full-batch steps"
    );
}

#[test]
fn criterion_10_pair_minibatches_average_to_the_full_gradient() {
    let game = LinearQuadraticGame::new(4, 2, 6, 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let theta = rand_pv(&mut rng, 4, 2.0);
        let w = rand_pv(&mut rng, 2, 2.0);
        let mut sum_g = vec![0.0; 4];
        let mut sum_d = vec![0.0; 2];
        let mut count = 0.0;
        for i in 0..6 {
            for j in (i + 1)..6 {
                let batch = MiniBatch::new(vec![i, j], 6).unwrap();
                for (s, v) in sum_g.iter_mut().zip(game.grad_g(&theta, &w, &batch).as_slice()) {
                    *s += v;
                }
                for (s, v) in sum_d.iter_mut().zip(game.grad_d(&theta, &w, &batch).as_slice()) {
                    *s += v;
                }
                count += 1.0;
            }
        }
        assert_eq!(count, 15.0, "C(6, 2) batches");
        for (sums, full) in [
            (&sum_g, game.full_grad_g(&theta, &w)),
            (&sum_d, game.full_grad_d(&theta, &w)),
        ] {
            for (s, f) in sums.iter().zip(full.as_slice()) {
                let err = (s / count - f).abs() / f.abs().max(1.0);
                assert!(err <= 1e-12, "batch mean off by {err:e} relative");
                worst = worst.max(err);
            }
        }
    }
    println!(
        "[criterion 10] PASS: all 15 size-2 batches of a 6-sample dataset \
         average to the full gradient, worst relative error {worst:.2e} <= 1e-12"
    );
}
