//! The two-timescale stochastic conjugate-gradient loop.
//!
//! One step at iterate pair `(theta_n, w_n)`:
//!
//! 1. draw the discriminator batch, form `g_n^D` at `(theta_n, w_n)`,
//!    set `d_n^D = -g_n^D + beta_n^D d_{n-1}^D`, move `w` by `b_n d_n^D`;
//! 2. draw the generator batch, form `g_n^G` at the *pre-update* pair
//!    `(theta_n, w_n)`, set `d_n^G = -g_n^G + beta_n^G d_{n-1}^G`, move
//!    `theta` by `a_n d_n^G`.
//!
//! Both players' histories advance only after both have stepped. The
//! discriminator draws from sampler stream 0, the generator from stream 1,
//! so a fixed seed fixes every batch.

use std::io::Write;

use crate::beta::{compute_beta, BetaInputs, BetaKind, BetaRule};
use crate::error::{Error, Result};
use crate::game::{BatchSampler, GameProblem};
use crate::schedule::Schedule;
use crate::vector::ParameterVector;

/// Iterate norms above this abort the run as divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Per-player solver settings.
#[derive(Clone, Debug)]
pub struct PlayerConfig {
    pub schedule: Schedule,
    pub beta: BetaRule,
    pub init: ParameterVector,
    /// Initial direction `d_{-1}`; zeros when absent (the standard choice).
    pub init_direction: Option<ParameterVector>,
    /// Euclidean-ball projection radius; no projection when absent.
    pub projection_radius: Option<f64>,
}

impl PlayerConfig {
    pub fn new(schedule: Schedule, beta: BetaRule, init: ParameterVector) -> Self {
        Self {
            schedule,
            beta,
            init,
            init_direction: None,
            projection_radius: None,
        }
    }
}

/// A full run description. `seed` drives only the batch samplers; problem
/// data is owned by the [`GameProblem`] itself.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub seed: u64,
    pub steps: u64,
    pub batch_size: usize,
    pub generator: PlayerConfig,
    pub discriminator: PlayerConfig,
    /// Record a trace row at every iterate index divisible by this stride
    /// (the final iterate is always recorded).
    pub trace_stride: u64,
    /// Attach iterate snapshots to every recorded row. Required by the
    /// variational-inequality metrics.
    pub record_iterates: bool,
}

impl RunConfig {
    pub fn new(generator: PlayerConfig, discriminator: PlayerConfig, steps: u64) -> Self {
        Self {
            seed: 0,
            steps,
            batch_size: 1,
            generator,
            discriminator,
            trace_stride: 1,
            record_iterates: false,
        }
    }
}

/// One recorded row. Row `n` describes iterate `n` together with the step
/// quantities computed there: the rates and conjugacy coefficients of the
/// step leaving iterate `n`, the minibatch gradient norms and minibatch
/// losses evaluated at `(theta_n, w_n)`. The terminal row records the same
/// probe quantities without applying the update.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub n: u64,
    pub rate_g: f64,
    pub rate_d: f64,
    pub beta_g: f64,
    pub beta_d: f64,
    pub grad_norm_g: f64,
    pub grad_norm_d: f64,
    pub loss_g: f64,
    pub loss_d: f64,
    pub theta: Option<ParameterVector>,
    pub w: Option<ParameterVector>,
}

/// Terminal per-player state: the final iterate plus the direction and
/// gradient of the last applied step (step `N-1`).
#[derive(Clone, Debug, PartialEq)]
pub struct PlayerState {
    pub iterate: ParameterVector,
    pub prev_direction: ParameterVector,
    pub prev_gradient: ParameterVector,
    pub steps_taken: u64,
}

/// The result of a completed (non-divergent) run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub generator: PlayerState,
    pub discriminator: PlayerState,
}

impl Trace {
    pub fn steps(&self) -> u64 {
        self.generator.steps_taken
    }

    pub fn final_theta(&self) -> &ParameterVector {
        &self.generator.iterate
    }

    pub fn final_w(&self) -> &ParameterVector {
        &self.discriminator.iterate
    }

    /// True when every iterate index 0..=N carries a snapshot, which is what
    /// the variational-inequality metrics need.
    pub fn has_dense_snapshots(&self) -> bool {
        self.records.len() as u64 == self.steps() + 1
            && self
                .records
                .iter()
                .enumerate()
                .all(|(j, r)| r.n == j as u64 && r.theta.is_some() && r.w.is_some())
    }

    /// Writes the trace as CSV: header plus one row per record. Floats carry
    /// 17 significant digits so values round-trip exactly. Iterate columns
    /// `x0..` (generator block then discriminator block) appear only when
    /// snapshots were recorded.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let with_iterates = self.records.iter().all(|r| r.theta.is_some() && r.w.is_some());
        let mut header = vec![
            "n".to_string(),
            "a_n".into(),
            "b_n".into(),
            "beta_g".into(),
            "beta_d".into(),
            "grad_norm_g".into(),
            "grad_norm_d".into(),
            "loss_g".into(),
            "loss_d".into(),
        ];
        if with_iterates {
            let k = self.generator.iterate.dim() + self.discriminator.iterate.dim();
            header.extend((0..k).map(|j| format!("x{j}")));
        }
        writeln!(out, "{}", header.join(","))?;
        for r in &self.records {
            let mut fields = vec![
                r.n.to_string(),
                float17(r.rate_g),
                float17(r.rate_d),
                float17(r.beta_g),
                float17(r.beta_d),
                float17(r.grad_norm_g),
                float17(r.grad_norm_d),
                float17(r.loss_g),
                float17(r.loss_d),
            ];
            if with_iterates {
                let theta = r.theta.as_ref().expect("checked above");
                let w = r.w.as_ref().expect("checked above");
                fields.extend(theta.as_slice().iter().map(|v| float17(*v)));
                fields.extend(w.as_slice().iter().map(|v| float17(*v)));
            }
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Formats a float with 17 significant digits (round-trip exact for f64).
pub(crate) fn float17(v: f64) -> String {
    format!("{v:.16e}")
}

/// `d = -g + beta * d_prev`.
pub fn cg_direction(
    grad: &ParameterVector,
    d_prev: &ParameterVector,
    beta: f64,
) -> Result<ParameterVector> {
    d_prev.axpy(beta, &grad.neg())
}

/// Projects onto the centered Euclidean ball of the given radius (identity
/// inside the ball). The radius must be positive.
pub fn project_ball(x: &ParameterVector, radius: f64) -> Result<ParameterVector> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "projection radius must be > 0, got {radius}"
        )));
    }
    let n = x.norm();
    if n <= radius {
        Ok(x.clone())
    } else {
        x.scale(radius / n)
    }
}

fn validate_player<P: GameProblem + ?Sized>(
    problem: &P,
    cfg: &PlayerConfig,
    dim: usize,
    who: &str,
) -> Result<()> {
    let _ = problem;
    if cfg.init.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: cfg.init.dim(),
        });
    }
    if let Some(d) = &cfg.init_direction {
        if d.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: d.dim(),
            });
        }
    }
    if let Some(r) = cfg.projection_radius {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{who} projection radius must be > 0, got {r}"
            )));
        }
    }
    Ok(())
}

struct PlayerLoopState {
    iterate: ParameterVector,
    direction: ParameterVector,
    prev_gradient: ParameterVector,
}

/// Runs Algorithm steps `0..N` and returns the trace. Fails fast with
/// [`Error::Diverged`] if an iterate goes non-finite or its norm exceeds
/// [`DIVERGENCE_NORM`].
pub fn run<P: GameProblem + ?Sized>(problem: &P, cfg: &RunConfig) -> Result<Trace> {
    if cfg.steps == 0 {
        return Err(Error::InvalidArgument("steps must be >= 1".into()));
    }
    if cfg.trace_stride == 0 {
        return Err(Error::InvalidArgument("trace stride must be >= 1".into()));
    }
    let len = problem.dataset_len();
    if cfg.batch_size == 0 || cfg.batch_size > len {
        return Err(Error::InvalidArgument(format!(
            "batch size {} not in 1..={len}",
            cfg.batch_size
        )));
    }
    validate_player(problem, &cfg.generator, problem.dim_theta(), "generator")?;
    validate_player(problem, &cfg.discriminator, problem.dim_w(), "discriminator")?;

    let mut sampler_d = BatchSampler::with_stream(len, cfg.seed, 0)?;
    let mut sampler_g = BatchSampler::with_stream(len, cfg.seed, 1)?;

    let mut gen = PlayerLoopState {
        iterate: cfg.generator.init.clone(),
        direction: cfg
            .generator
            .init_direction
            .clone()
            .unwrap_or_else(|| ParameterVector::zeros(problem.dim_theta())),
        prev_gradient: ParameterVector::zeros(problem.dim_theta()),
    };
    let mut disc = PlayerLoopState {
        iterate: cfg.discriminator.init.clone(),
        direction: cfg
            .discriminator
            .init_direction
            .clone()
            .unwrap_or_else(|| ParameterVector::zeros(problem.dim_w())),
        prev_gradient: ParameterVector::zeros(problem.dim_w()),
    };

    let mut records = Vec::new();
    for n in 0..=cfg.steps {
        let k = n + 1; // 1-based index for schedules and decay factors
        let rate_g = cfg.generator.schedule.rate_at(k);
        let rate_d = cfg.discriminator.schedule.rate_at(k);

        // Discriminator quantities first, then generator quantities, both at
        // the pre-update pair (theta_n, w_n).
        let batch_d = sampler_d.next_batch(cfg.batch_size)?;
        let grad_d = problem.grad_d(&gen.iterate, &disc.iterate, &batch_d);
        let beta_d = compute_beta(
            &cfg.discriminator.beta,
            &BetaInputs::new(&grad_d, &disc.prev_gradient, &disc.direction, k)?,
        )?;
        let batch_g = sampler_g.next_batch(cfg.batch_size)?;
        let grad_g = problem.grad_g(&gen.iterate, &disc.iterate, &batch_g);
        let beta_g = compute_beta(
            &cfg.generator.beta,
            &BetaInputs::new(&grad_g, &gen.prev_gradient, &gen.direction, k)?,
        )?;

        if n % cfg.trace_stride == 0 || n == cfg.steps {
            records.push(TraceRecord {
                n,
                rate_g,
                rate_d,
                beta_g,
                beta_d,
                grad_norm_g: grad_g.norm(),
                grad_norm_d: grad_d.norm(),
                loss_g: problem.loss_g(&gen.iterate, &disc.iterate, &batch_g),
                loss_d: problem.loss_d(&gen.iterate, &disc.iterate, &batch_d),
                theta: cfg.record_iterates.then(|| gen.iterate.clone()),
                w: cfg.record_iterates.then(|| disc.iterate.clone()),
            });
        }
        if n == cfg.steps {
            break;
        }

        let dir_d = cg_direction(&grad_d, &disc.direction, beta_d)
            .map_err(|e| diverged(n, "discriminator", e))?;
        let mut w_next = dir_d
            .axpy(rate_d, &disc.iterate)
            .map_err(|e| diverged(n, "discriminator", e))?;
        if let Some(r) = cfg.discriminator.projection_radius {
            w_next = project_ball(&w_next, r)?;
        }

        let dir_g = cg_direction(&grad_g, &gen.direction, beta_g)
            .map_err(|e| diverged(n, "generator", e))?;
        let mut theta_next = dir_g
            .axpy(rate_g, &gen.iterate)
            .map_err(|e| diverged(n, "generator", e))?;
        if let Some(r) = cfg.generator.projection_radius {
            theta_next = project_ball(&theta_next, r)?;
        }

        for (v, who) in [(&w_next, "discriminator"), (&theta_next, "generator")] {
            let norm = v.norm();
            if !norm.is_finite() || norm > DIVERGENCE_NORM {
                return Err(Error::Diverged {
                    step: n,
                    player: if who == "generator" {
                        "generator"
                    } else {
                        "discriminator"
                    },
                    detail: format!("iterate norm {norm:e} exceeds {DIVERGENCE_NORM:e}"),
                });
            }
        }

        // histories advance only after both players have stepped
        disc.direction = dir_d;
        disc.prev_gradient = grad_d;
        gen.direction = dir_g;
        gen.prev_gradient = grad_g;
        disc.iterate = w_next;
        gen.iterate = theta_next;
    }

    Ok(Trace {
        records,
        generator: PlayerState {
            iterate: gen.iterate,
            prev_direction: gen.direction,
            prev_gradient: gen.prev_gradient,
            steps_taken: cfg.steps,
        },
        discriminator: PlayerState {
            iterate: disc.iterate,
            prev_direction: disc.direction,
            prev_gradient: disc.prev_gradient,
            steps_taken: cfg.steps,
        },
    })
}

fn diverged(step: u64, player: &'static str, e: Error) -> Error {
    match e {
        Error::NonFinite { context } => Error::Diverged {
            step,
            player,
            detail: format!("non-finite value in {context}"),
        },
        other => other,
    }
}

/// Replays a constant-`beta`, constant-rate run with the explicit two-line
/// momentum recursion `v_n = g_n + c v_{n-1}`, `x_{n+1} = x_n - a v_n`
/// (with `v_{-1} = -d_{-1}`) and returns the largest absolute coordinate gap
/// against the solver's iterates. The recursions are arithmetically
/// identical, so the gap is exactly zero.
pub fn momentum_replay_max_gap<P: GameProblem + ?Sized>(
    problem: &P,
    cfg: &RunConfig,
) -> Result<f64> {
    let coeff = |rule: &BetaRule, who: &str| -> Result<f64> {
        match rule.kind() {
            BetaKind::Zero => Ok(0.0),
            BetaKind::Constant(c) => Ok(c),
            other => Err(Error::InvalidArgument(format!(
                "momentum replay needs a constant conjugacy rule, {who} uses {other}"
            ))),
        }
    };
    let const_rate = |s: &Schedule, who: &str| -> Result<f64> {
        match s {
            Schedule::Constant { rate } => Ok(*rate),
            other => Err(Error::InvalidArgument(format!(
                "momentum replay needs constant rates, {who} uses {other}"
            ))),
        }
    };
    let c_g = coeff(&cfg.generator.beta, "generator")?;
    let c_d = coeff(&cfg.discriminator.beta, "discriminator")?;
    let a = const_rate(&cfg.generator.schedule, "generator")?;
    let b = const_rate(&cfg.discriminator.schedule, "discriminator")?;

    let mut solver_cfg = cfg.clone();
    solver_cfg.trace_stride = 1;
    solver_cfg.record_iterates = true;
    let trace = run(problem, &solver_cfg)?;

    let len = problem.dataset_len();
    let mut sampler_d = BatchSampler::with_stream(len, cfg.seed, 0)?;
    let mut sampler_g = BatchSampler::with_stream(len, cfg.seed, 1)?;
    let mut theta = cfg.generator.init.clone();
    let mut w = cfg.discriminator.init.clone();
    let mut v_g = cfg
        .generator
        .init_direction
        .clone()
        .unwrap_or_else(|| ParameterVector::zeros(problem.dim_theta()))
        .neg();
    let mut v_d = cfg
        .discriminator
        .init_direction
        .clone()
        .unwrap_or_else(|| ParameterVector::zeros(problem.dim_w()))
        .neg();

    let mut max_gap = 0.0f64;
    let mut compare = |x: &ParameterVector, snap: &ParameterVector| {
        for (p, q) in x.as_slice().iter().zip(snap.as_slice()) {
            max_gap = max_gap.max((p - q).abs());
        }
    };
    compare(&theta, trace.records[0].theta.as_ref().expect("dense"));
    compare(&w, trace.records[0].w.as_ref().expect("dense"));

    for n in 0..cfg.steps {
        let batch_d = sampler_d.next_batch(cfg.batch_size)?;
        let g_d = problem.grad_d(&theta, &w, &batch_d);
        let batch_g = sampler_g.next_batch(cfg.batch_size)?;
        let g_g = problem.grad_g(&theta, &w, &batch_g);

        v_d = v_d.axpy(c_d, &g_d)?;
        let mut w_next = v_d.neg().axpy(b, &w)?;
        if let Some(r) = cfg.discriminator.projection_radius {
            w_next = project_ball(&w_next, r)?;
        }
        v_g = v_g.axpy(c_g, &g_g)?;
        let mut theta_next = v_g.neg().axpy(a, &theta)?;
        if let Some(r) = cfg.generator.projection_radius {
            theta_next = project_ball(&theta_next, r)?;
        }
        w = w_next;
        theta = theta_next;
        let rec = &trace.records[(n + 1) as usize];
        compare(&theta, rec.theta.as_ref().expect("dense"));
        compare(&w, rec.w.as_ref().expect("dense"));
    }
    Ok(max_gap)
}
