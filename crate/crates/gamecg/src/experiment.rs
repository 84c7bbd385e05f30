//! Experiment drivers: single runs, grid sweeps, and the canonical toy
//! comparison study. All outputs are CSV files under the configured output
//! directory; re-running a config reproduces every file byte for byte
//! except the summary's wall-time column.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::beta::{BetaKind, BetaRule, ClipMode};
use crate::config::{ExperimentSpec, ToyStudySpec};
use crate::error::{Error, Result};
use crate::game::{GameProblem, ToyGame};
use crate::metrics::{fit_rate, log_spaced_checkpoints, RateFit, ViAccumulator, ViSeries};
use crate::schedule::{validate_timescales, Schedule};
use crate::solver::{float17, run, PlayerConfig, RunConfig, Trace};
use crate::vector::ParameterVector;

/// One grid cell's outcome. Divergent cells are flagged, not fatal.
#[derive(Clone, Debug)]
pub struct SummaryRow {
    pub cell: usize,
    pub problem: String,
    pub beta_g: String,
    pub beta_d: String,
    pub rate_g: f64,
    pub rate_d: f64,
    pub seed: u64,
    pub steps: u64,
    pub diverged: bool,
    pub final_grad_norm_g: f64,
    pub final_grad_norm_d: f64,
    pub final_loss_g: f64,
    pub final_loss_d: f64,
    pub vi_g: Option<f64>,
    pub vi_d: Option<f64>,
    pub wall_time_s: f64,
    pub trace_file: String,
}

#[derive(Clone, Debug)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn divergent_count(&self) -> usize {
        self.rows.iter().filter(|r| r.diverged).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "cell,problem,beta_g,beta_d,rate_g,rate_d,seed,steps,diverged,\
             final_grad_norm_g,final_grad_norm_d,final_loss_g,final_loss_d,\
             vi_g,vi_d,wall_time_s,trace_file"
        )?;
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(float17).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.cell,
                r.problem,
                r.beta_g,
                r.beta_d,
                float17(r.rate_g),
                float17(r.rate_d),
                r.seed,
                r.steps,
                r.diverged,
                float17(r.final_grad_norm_g),
                float17(r.final_grad_norm_d),
                float17(r.final_loss_g),
                float17(r.final_loss_d),
                opt(r.vi_g),
                opt(r.vi_d),
                float17(r.wall_time_s),
                r.trace_file,
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct GridCell {
    index: usize,
    beta: Option<BetaKind>,
    rate_g: Option<f64>,
    rate_d: Option<f64>,
    seed: u64,
}

/// Short, filesystem-safe float label (`2.5e-3`, `1e-2`, ...).
fn rate_label(r: f64) -> String {
    format!("{r:e}")
}

/// File-name token for a conjugacy rule: `:` is not portable in file names,
/// so `const:0.9` becomes `const-0.9`.
fn beta_label(kind: &BetaKind) -> String {
    kind.to_string().replace(':', "-")
}

fn apply_cell(base: &RunConfig, cell: &GridCell) -> Result<RunConfig> {
    let mut cfg = base.clone();
    cfg.seed = cell.seed;
    if let Some(kind) = cell.beta {
        cfg.generator.beta = BetaRule::new(kind, cfg.generator.beta.clip())?;
        cfg.discriminator.beta = BetaRule::new(kind, cfg.discriminator.beta.clip())?;
    }
    if let Some(r) = cell.rate_g {
        cfg.generator.schedule = cfg.generator.schedule.with_base_rate(r)?;
    }
    if let Some(r) = cell.rate_d {
        cfg.discriminator.schedule = cfg.discriminator.schedule.with_base_rate(r)?;
    }
    Ok(cfg)
}

fn final_full_stats(problem: &dyn GameProblem, trace: &Trace) -> (f64, f64, f64, f64) {
    let theta = trace.final_theta();
    let w = trace.final_w();
    (
        problem.full_grad_g(theta, w).norm(),
        problem.full_grad_d(theta, w).norm(),
        problem.full_loss_g(theta, w),
        problem.full_loss_d(theta, w),
    )
}

fn run_cell(spec: &ExperimentSpec, cell: &GridCell) -> Result<SummaryRow> {
    let problem = spec.problem.build()?;
    let mut cfg = apply_cell(&spec.run, cell)?;
    if spec.metrics.vi {
        cfg.trace_stride = 1;
        cfg.record_iterates = true;
    }
    let label = spec.problem.label();
    let beta_token = cell
        .beta
        .map(|k| beta_label(&k))
        .unwrap_or_else(|| "base".into());
    let rate_g = cfg.generator.schedule.base_rate();
    let rate_d = cfg.discriminator.schedule.base_rate();
    let file_name = format!(
        "{label}_{beta_token}_{}_{}_{}.csv",
        rate_label(rate_g),
        rate_label(rate_d),
        cell.seed
    );

    let start = Instant::now();
    let outcome = run(problem.as_ref(), &cfg);
    let wall_time_s = start.elapsed().as_secs_f64();

    let mut row = SummaryRow {
        cell: cell.index,
        problem: label.to_string(),
        beta_g: cfg.generator.beta.kind().to_string(),
        beta_d: cfg.discriminator.beta.kind().to_string(),
        rate_g,
        rate_d,
        seed: cell.seed,
        steps: cfg.steps,
        diverged: false,
        final_grad_norm_g: f64::NAN,
        final_grad_norm_d: f64::NAN,
        final_loss_g: f64::NAN,
        final_loss_d: f64::NAN,
        vi_g: None,
        vi_d: None,
        wall_time_s,
        trace_file: String::new(),
    };
    match outcome {
        Ok(trace) => {
            let path = spec.output_dir.join(&file_name);
            trace.write_csv(BufWriter::new(File::create(&path)?))?;
            let (gg, gd, lg, ld) = final_full_stats(problem.as_ref(), &trace);
            row.final_grad_norm_g = gg;
            row.final_grad_norm_d = gd;
            row.final_loss_g = lg;
            row.final_loss_d = ld;
            row.trace_file = file_name;
            if spec.metrics.vi {
                let mut acc = ViAccumulator::new(problem.as_ref(), cfg.steps, None)?;
                acc.push(&trace)?;
                let series = acc.finish()?;
                row.vi_g = series.gap_g.last().copied();
                row.vi_d = series.gap_d.last().copied();
            }
            Ok(row)
        }
        Err(Error::Diverged { .. }) => {
            row.diverged = true;
            Ok(row)
        }
        Err(e) => Err(e),
    }
}

/// Expands the sweep axes into cells (empty axes keep the base config) and
/// runs them, writing one trace CSV per completed cell plus `summary.csv`.
/// Fails before running anything if the cell count exceeds
/// `grid.max_cells`.
pub fn run_grid(spec: &ExperimentSpec) -> Result<SummaryTable> {
    let betas: Vec<Option<BetaKind>> = if spec.grid.betas.is_empty() {
        vec![None]
    } else {
        spec.grid.betas.iter().copied().map(Some).collect()
    };
    let rates_g: Vec<Option<f64>> = if spec.grid.rates_g.is_empty() {
        vec![None]
    } else {
        spec.grid.rates_g.iter().copied().map(Some).collect()
    };
    let rates_d: Vec<Option<f64>> = if spec.grid.rates_d.is_empty() {
        vec![None]
    } else {
        spec.grid.rates_d.iter().copied().map(Some).collect()
    };
    let seeds: Vec<u64> = if spec.grid.seeds.is_empty() {
        vec![spec.run.seed]
    } else {
        spec.grid.seeds.clone()
    };

    let total = betas.len() * rates_g.len() * rates_d.len() * seeds.len();
    if total > spec.grid.max_cells {
        return Err(Error::InvalidArgument(format!(
            "grid has {total} cells, exceeding max_cells = {} (raise [grid] max_cells to allow)",
            spec.grid.max_cells
        )));
    }

    let mut cells = Vec::with_capacity(total);
    let mut index = 0usize;
    for &beta in &betas {
        for &rate_g in &rates_g {
            for &rate_d in &rates_d {
                for &seed in &seeds {
                    cells.push(GridCell {
                        index,
                        beta,
                        rate_g,
                        rate_d,
                        seed,
                    });
                    index += 1;
                }
            }
        }
    }

    std::fs::create_dir_all(&spec.output_dir)?;
    let run_all = || -> Result<Vec<SummaryRow>> {
        cells
            .par_iter()
            .map(|cell| run_cell(spec, cell))
            .collect()
    };
    let rows = match spec.grid.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?
            .install(run_all),
        None => run_all(),
    }?;

    let table = SummaryTable { rows };
    let path = spec.output_dir.join("summary.csv");
    table.write_csv(BufWriter::new(File::create(path)?))?;
    Ok(table)
}

/// Outcome of a single configured run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub trace_path: PathBuf,
    pub steps: u64,
    pub regime: String,
    pub final_theta: ParameterVector,
    pub final_w: ParameterVector,
    pub final_grad_norm_g: f64,
    pub final_grad_norm_d: f64,
    pub final_loss_g: f64,
    pub final_loss_d: f64,
    pub metrics: Option<MetricsReport>,
}

#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub csv_path: PathBuf,
    pub fit_g: RateFit,
    pub fit_d: RateFit,
}

/// Runs the base configuration once, writing `<problem>_trace.csv` and,
/// when enabled, `metrics.csv` with rate fits on both gap series.
pub fn run_single(spec: &ExperimentSpec) -> Result<RunReport> {
    let problem = spec.problem.build()?;
    std::fs::create_dir_all(&spec.output_dir)?;
    let trace = run(problem.as_ref(), &spec.run)?;
    let label = spec.problem.label();
    let trace_path = spec.output_dir.join(format!("{label}_trace.csv"));
    trace.write_csv(BufWriter::new(File::create(&trace_path)?))?;
    let (gg, gd, lg, ld) = final_full_stats(problem.as_ref(), &trace);
    let regime = validate_timescales(
        &spec.run.generator.schedule,
        &spec.run.discriminator.schedule,
    )
    .describe()
    .to_string();

    let metrics = if spec.metrics.vi {
        let mut acc = ViAccumulator::new(problem.as_ref(), spec.run.steps, None)?;
        acc.push(&trace)?;
        let series = acc.finish()?;
        let (lo, hi) = spec
            .metrics
            .fit_window
            .unwrap_or(((spec.run.steps / 100).max(1), spec.run.steps));
        let checkpoints = log_spaced_checkpoints(1, spec.run.steps, spec.metrics.fit_points)?;
        let csv_path = spec.output_dir.join("metrics.csv");
        series.write_csv(BufWriter::new(File::create(&csv_path)?), &checkpoints)?;
        let window = (lo as f64, hi as f64);
        let (pts_g, pts_d) = series.sampled_points(&checkpoints)?;
        Some(MetricsReport {
            csv_path,
            fit_g: fit_rate(&pts_g, window)?,
            fit_d: fit_rate(&pts_d, window)?,
        })
    } else {
        None
    };

    Ok(RunReport {
        trace_path,
        steps: spec.run.steps,
        regime,
        final_theta: trace.final_theta().clone(),
        final_w: trace.final_w().clone(),
        final_grad_norm_g: gg,
        final_grad_norm_d: gd,
        final_loss_g: lg,
        final_loss_d: ld,
        metrics,
    })
}

pub fn vi_series_of_run(spec: &ExperimentSpec, trace: &Trace) -> Result<ViSeries> {
    let problem = spec.problem.build()?;
    let mut acc = ViAccumulator::new(problem.as_ref(), trace.steps(), None)?;
    acc.push(trace)?;
    acc.finish()
}

/// One line of the toy comparison study.
#[derive(Clone, Debug)]
pub struct ToyReportLine {
    pub method: String,
    pub schedule: String,
    pub initial_distance: f64,
    pub final_distance: f64,
    pub initial_objective_gap: f64,
    pub final_objective_gap: f64,
    /// Fraction of steps whose iterate norm did not increase.
    pub norm_nonincreasing_fraction: f64,
    pub trace_file: String,
}

const TOY_TARGET_VALUE: f64 = 100.0;

fn toy_methods() -> Vec<(&'static str, BetaRule, f64, f64)> {
    // (label, rule, generator rate, discriminator rate); rates follow the
    // canonical minimax study this reproduces
    vec![
        ("sgd", BetaRule::zero(), 3.75e-8, 1e-6),
        (
            "momentum",
            BetaRule::new(BetaKind::Constant(0.9), ClipMode::Raw).expect("valid rule"),
            3.75e-8,
            1e-7,
        ),
        (
            "cg-fr",
            BetaRule::new(BetaKind::FletcherReeves, ClipMode::ClampHalf).expect("valid rule"),
            2.5e-8,
            5e-7,
        ),
    ]
}

/// Runs the three methods under constant and square-root-decay schedules on
/// the deterministic toy problem, writing one trace per run plus
/// `toy_report.csv`, and returns the report lines.
pub fn report_toy(spec: &ToyStudySpec) -> Result<Vec<ToyReportLine>> {
    std::fs::create_dir_all(&spec.output_dir)?;
    let problem = ToyGame::new();
    let init_theta = ParameterVector::new(vec![spec.init.0])?;
    let init_w = ParameterVector::new(vec![spec.init.1])?;
    let mut lines = Vec::new();

    for (method, rule, rate_g, rate_d) in toy_methods() {
        for decay in [false, true] {
            let (sched_label, schedule_g, schedule_d) = if decay {
                (
                    "decay",
                    Schedule::power_decay(rate_g, 0.5)?,
                    Schedule::power_decay(rate_d, 0.5)?,
                )
            } else {
                (
                    "const",
                    Schedule::constant(rate_g)?,
                    Schedule::constant(rate_d)?,
                )
            };
            let cfg = RunConfig {
                seed: 0,
                steps: spec.steps,
                batch_size: 1,
                generator: PlayerConfig {
                    schedule: schedule_g,
                    beta: rule,
                    init: init_theta.clone(),
                    init_direction: None,
                    projection_radius: None,
                },
                discriminator: PlayerConfig {
                    schedule: schedule_d,
                    beta: rule,
                    init: init_w.clone(),
                    init_direction: None,
                    projection_radius: None,
                },
                trace_stride: 1,
                record_iterates: true,
            };
            let trace = run(&problem, &cfg)?;
            let file_name = format!("toy_{method}_{sched_label}.csv");
            trace.write_csv(BufWriter::new(
                File::create(spec.output_dir.join(&file_name))?,
            ))?;

            let pair_norm = |rec: &crate::solver::TraceRecord| -> f64 {
                let t = rec.theta.as_ref().expect("dense");
                let w = rec.w.as_ref().expect("dense");
                (t.dot(t).expect("same dim") + w.dot(w).expect("same dim")).sqrt()
            };
            let first = trace.records.first().expect("at least two records");
            let last = trace.records.last().expect("at least two records");
            let mut nonincreasing = 0usize;
            for pair in trace.records.windows(2) {
                if pair_norm(&pair[1]) <= pair_norm(&pair[0]) {
                    nonincreasing += 1;
                }
            }
            lines.push(ToyReportLine {
                method: method.to_string(),
                schedule: sched_label.to_string(),
                initial_distance: pair_norm(first),
                final_distance: pair_norm(last),
                initial_objective_gap: (first.loss_g - TOY_TARGET_VALUE).abs(),
                final_objective_gap: (last.loss_g - TOY_TARGET_VALUE).abs(),
                norm_nonincreasing_fraction: nonincreasing as f64
                    / (trace.records.len() - 1) as f64,
                trace_file: file_name,
            });
        }
    }

    let report_path = spec.output_dir.join("toy_report.csv");
    let mut out = BufWriter::new(File::create(report_path)?);
    writeln!(
        out,
        "method,schedule,initial_distance,final_distance,initial_objective_gap,\
         final_objective_gap,norm_nonincreasing_fraction,trace_file"
    )?;
    for l in &lines {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            l.method,
            l.schedule,
            float17(l.initial_distance),
            float17(l.final_distance),
            float17(l.initial_objective_gap),
            float17(l.final_objective_gap),
            float17(l.norm_nonincreasing_fraction),
            l.trace_file,
        )?;
    }
    Ok(lines)
}

/// Used by the command-line entry point to keep path handling in one place.
pub fn summary_path(dir: &Path) -> PathBuf {
    dir.join("summary.csv")
}
