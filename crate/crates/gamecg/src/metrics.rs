//! Convergence diagnostics: variational-inequality gap averages over
//! recorded runs, and least-squares rate fits on log-log data.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::game::GameProblem;
use crate::solver::{float17, Trace};
use crate::vector::ParameterVector;

/// Compensated accumulator (Kahan summation, Neumaier's variant, which
/// stays exact even when an addend exceeds the running sum). The gap
/// averages sum up to 1e5 terms of mixed sign, where naive summation loses
/// the digits the rate fits read.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Seed-averaged gap series. Entry `i` corresponds to step `n = i + 1`:
///
/// `gap_g[i] = mean over runs of (1/n) * sum_{j=1..n} <theta_j - theta_ref,
/// full generator gradient at (theta_j, w_j)>`
///
/// and symmetrically for the discriminator. Envelopes are per-step minima
/// and maxima across runs; `grad_norm_*` are seed means of the full-batch
/// gradient norms at each iterate.
#[derive(Clone, Debug)]
pub struct ViSeries {
    pub steps: u64,
    pub runs: usize,
    pub gap_g: Vec<f64>,
    pub gap_d: Vec<f64>,
    pub gap_g_min: Vec<f64>,
    pub gap_g_max: Vec<f64>,
    pub gap_d_min: Vec<f64>,
    pub gap_d_max: Vec<f64>,
    pub grad_norm_g: Vec<f64>,
    pub grad_norm_d: Vec<f64>,
}

/// `(step, value)` pairs ready for [`fit_rate`].
pub type GapPoints = Vec<(f64, f64)>;

impl ViSeries {
    /// `(n, gap)` pairs for the generator, for feeding into [`fit_rate`].
    pub fn points_g(&self) -> GapPoints {
        self.gap_g
            .iter()
            .enumerate()
            .map(|(i, v)| ((i + 1) as f64, *v))
            .collect()
    }

    pub fn points_d(&self) -> Vec<(f64, f64)> {
        self.gap_d
            .iter()
            .enumerate()
            .map(|(i, v)| ((i + 1) as f64, *v))
            .collect()
    }

    /// Subsamples the series at the given step checkpoints (1-based, each
    /// must be `<= steps`), returning `(n, gap)` pairs per player.
    pub fn sampled_points(&self, checkpoints: &[u64]) -> Result<(GapPoints, GapPoints)> {
        let mut g = Vec::with_capacity(checkpoints.len());
        let mut d = Vec::with_capacity(checkpoints.len());
        for &n in checkpoints {
            if n == 0 || n > self.steps {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint {n} outside 1..={}",
                    self.steps
                )));
            }
            let i = (n - 1) as usize;
            g.push((n as f64, self.gap_g[i]));
            d.push((n as f64, self.gap_d[i]));
        }
        Ok((g, d))
    }

    /// Writes the series as CSV at the given checkpoints with the columns
    /// `N,A_G,A_D,A_G_min,A_G_max,A_D_min,A_D_max,grad_norm_g_mean,grad_norm_d_mean`.
    pub fn write_csv<W: Write>(&self, mut out: W, checkpoints: &[u64]) -> Result<()> {
        writeln!(
            out,
            "N,A_G,A_D,A_G_min,A_G_max,A_D_min,A_D_max,grad_norm_g_mean,grad_norm_d_mean"
        )?;
        for &n in checkpoints {
            if n == 0 || n > self.steps {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint {n} outside 1..={}",
                    self.steps
                )));
            }
            let i = (n - 1) as usize;
            let fields = [
                n.to_string(),
                float17(self.gap_g[i]),
                float17(self.gap_d[i]),
                float17(self.gap_g_min[i]),
                float17(self.gap_g_max[i]),
                float17(self.gap_d_min[i]),
                float17(self.gap_d_max[i]),
                float17(self.grad_norm_g[i]),
                float17(self.grad_norm_d[i]),
            ];
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Streaming builder for [`ViSeries`]: push one trace per seed and finish.
/// Traces can be dropped after pushing, so a multi-seed study never holds
/// more than one dense trace in memory.
pub struct ViAccumulator<'p, P: GameProblem + ?Sized> {
    problem: &'p P,
    reference_theta: ParameterVector,
    reference_w: ParameterVector,
    steps: u64,
    runs: usize,
    sum_g: Vec<KahanSum>,
    sum_d: Vec<KahanSum>,
    min_g: Vec<f64>,
    max_g: Vec<f64>,
    min_d: Vec<f64>,
    max_d: Vec<f64>,
    norm_g: Vec<KahanSum>,
    norm_d: Vec<KahanSum>,
}

impl<'p, P: GameProblem + ?Sized> ViAccumulator<'p, P> {
    /// `reference` defaults to the problem's known local equilibrium; passing
    /// neither is an error.
    pub fn new(
        problem: &'p P,
        steps: u64,
        reference: Option<(ParameterVector, ParameterVector)>,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("steps must be >= 1".into()));
        }
        let (reference_theta, reference_w) = match reference.or_else(|| problem.known_lne()) {
            Some(pair) => pair,
            None => {
                return Err(Error::InvalidArgument(format!(
                    "problem '{}' has no known equilibrium; pass an explicit reference",
                    problem.name()
                )))
            }
        };
        if reference_theta.dim() != problem.dim_theta() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim_theta(),
                got: reference_theta.dim(),
            });
        }
        if reference_w.dim() != problem.dim_w() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim_w(),
                got: reference_w.dim(),
            });
        }
        let n = steps as usize;
        Ok(Self {
            problem,
            reference_theta,
            reference_w,
            steps,
            runs: 0,
            sum_g: vec![KahanSum::new(); n],
            sum_d: vec![KahanSum::new(); n],
            min_g: vec![f64::INFINITY; n],
            max_g: vec![f64::NEG_INFINITY; n],
            min_d: vec![f64::INFINITY; n],
            max_d: vec![f64::NEG_INFINITY; n],
            norm_g: vec![KahanSum::new(); n],
            norm_d: vec![KahanSum::new(); n],
        })
    }

    /// Folds in one run. The trace must carry a snapshot at every iterate
    /// (`trace_stride = 1`, `record_iterates = true`) and match the step
    /// count of the accumulator.
    pub fn push(&mut self, trace: &Trace) -> Result<()> {
        if trace.steps() != self.steps {
            return Err(Error::InvalidArgument(format!(
                "trace has {} steps, accumulator expects {}",
                trace.steps(),
                self.steps
            )));
        }
        if !trace.has_dense_snapshots() {
            return Err(Error::InvalidArgument(
                "variational-inequality metrics need trace_stride = 1 and record_iterates = true"
                    .into(),
            ));
        }
        let mut running_g = KahanSum::new();
        let mut running_d = KahanSum::new();
        // post-update iterates only: records 1..=N
        for (i, rec) in trace.records.iter().skip(1).enumerate() {
            let theta = rec.theta.as_ref().expect("dense snapshots");
            let w = rec.w.as_ref().expect("dense snapshots");
            let g_full = self.problem.full_grad_g(theta, w);
            let d_full = self.problem.full_grad_d(theta, w);
            let dev_g = theta.sub(&self.reference_theta)?;
            let dev_w = w.sub(&self.reference_w)?;
            running_g.add(dev_g.dot(&g_full)?);
            running_d.add(dev_w.dot(&d_full)?);
            let n = (i + 1) as f64;
            let avg_g = running_g.value() / n;
            let avg_d = running_d.value() / n;
            self.sum_g[i].add(avg_g);
            self.sum_d[i].add(avg_d);
            self.min_g[i] = self.min_g[i].min(avg_g);
            self.max_g[i] = self.max_g[i].max(avg_g);
            self.min_d[i] = self.min_d[i].min(avg_d);
            self.max_d[i] = self.max_d[i].max(avg_d);
            self.norm_g[i].add(g_full.norm());
            self.norm_d[i].add(d_full.norm());
        }
        self.runs += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<ViSeries> {
        if self.runs == 0 {
            return Err(Error::InvalidArgument(
                "no runs pushed into the accumulator".into(),
            ));
        }
        let r = self.runs as f64;
        let mean = |v: Vec<KahanSum>| v.into_iter().map(|s| s.value() / r).collect::<Vec<_>>();
        Ok(ViSeries {
            steps: self.steps,
            runs: self.runs,
            gap_g: mean(self.sum_g),
            gap_d: mean(self.sum_d),
            gap_g_min: self.min_g,
            gap_g_max: self.max_g,
            gap_d_min: self.min_d,
            gap_d_max: self.max_d,
            grad_norm_g: mean(self.norm_g),
            grad_norm_d: mean(self.norm_d),
        })
    }
}

/// Seed-averaged gap series over a set of dense traces (see
/// [`ViAccumulator`] for the streaming form).
pub fn vi_average<P: GameProblem + ?Sized>(
    problem: &P,
    traces: &[Trace],
    reference: Option<(ParameterVector, ParameterVector)>,
) -> Result<ViSeries> {
    let steps = traces
        .first()
        .map(Trace::steps)
        .ok_or_else(|| Error::InvalidArgument("vi_average needs at least one trace".into()))?;
    let mut acc = ViAccumulator::new(problem, steps, reference)?;
    for t in traces {
        acc.push(t)?;
    }
    acc.finish()
}

/// A fitted power law `|value| ~ exp(intercept) * n^slope` over a step
/// window, from least squares on `(ln n, ln |value|)`.
#[derive(Clone, Copy, Debug)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    /// Points inside the window discarded because the value was exactly
    /// zero (a sign crossing) or non-finite.
    pub points_dropped: usize,
    pub window: (f64, f64),
}

/// Fits a rate exponent to `(n, value)` pairs restricted to `window`
/// (inclusive). Values enter as absolute values; zeros and non-finite
/// values are dropped with a count. At least five usable points required.
pub fn fit_rate(points: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidArgument(format!(
            "invalid fit window [{lo}, {hi}]"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0usize;
    for &(n, v) in points {
        if n < lo || n > hi {
            continue;
        }
        let a = v.abs();
        if a == 0.0 || !a.is_finite() || !n.is_finite() {
            dropped += 1;
            continue;
        }
        xs.push(n.ln());
        ys.push(a.ln());
    }
    let m = xs.len();
    if m < 5 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 5 usable points in the window, got {m} ({dropped} dropped)"
        )));
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::InvalidArgument(
            "rate fit needs at least two distinct step values".into(),
        ));
    }
    let mf = m as f64;
    let mean_x = xs.iter().sum::<f64>() / mf;
    let mean_y = ys.iter().sum::<f64>() / mf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..m {
        let dx = xs[i] - mean_x;
        let dy = ys[i] - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "rate fit needs at least two distinct step values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points_used: m,
        points_dropped: dropped,
        window: (lo, hi),
    })
}

/// Distinct integer checkpoints, approximately log-spaced across
/// `[lo, hi]` (inclusive, both >= 1). Fewer than `count` points come back
/// when the range is too narrow to hold them.
pub fn log_spaced_checkpoints(lo: u64, hi: u64, count: usize) -> Result<Vec<u64>> {
    if lo == 0 || hi < lo {
        return Err(Error::InvalidArgument(format!(
            "invalid checkpoint range [{lo}, {hi}]"
        )));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("checkpoint count must be >= 1".into()));
    }
    if count == 1 || lo == hi {
        return Ok(vec![hi]);
    }
    let (llo, lhi) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let t = i as f64 / (count - 1) as f64;
        let v = (llo + t * (lhi - llo)).exp().round() as u64;
        let v = v.clamp(lo, hi);
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

/// Reads a metrics CSV (as written by [`ViSeries::write_csv`]) back into a
/// header row and per-column values. The first column must be `N`.
pub fn read_metrics_csv<R: BufRead>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::InvalidArgument("metrics CSV is empty".into()))?;
    let header: Vec<String> = header_line.split(',').map(|s| s.trim().to_string()).collect();
    if header.first().map(String::as_str) != Some("N") {
        return Err(Error::InvalidArgument(format!(
            "metrics CSV must start with an 'N' column, got '{}'",
            header.first().cloned().unwrap_or_default()
        )));
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (row_idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::InvalidArgument(format!(
                "metrics CSV row {} has {} fields, expected {}",
                row_idx + 2,
                fields.len(),
                header.len()
            )));
        }
        for (c, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!(
                    "metrics CSV row {}: cannot parse '{}' as a number",
                    row_idx + 2,
                    field
                ))
            })?;
            columns[c].push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(Error::InvalidArgument("metrics CSV has no data rows".into()));
    }
    Ok((header, columns))
}
