//! TOML run configuration. Unknown keys are rejected with the offending
//! key and position, so typos fail loudly instead of silently running a
//! default.
//!
//! ```toml
//! [problem]
//! name = "linear-quadratic"   # or "toy"
//! seed = 1                    # problem-data seed, separate from [run] seed
//! dim_theta = 4
//! dim_w = 4
//! dataset_len = 64
//!
//! [run]
//! seed = 7
//! steps = 10000
//! batch_size = 1
//! trace_stride = 1
//! record_iterates = false
//!
//! [generator]
//! schedule = "power:0.02:0.8"   # const:<a> | power:<a>:<eta> | step:<a>:<gamma>:<T>
//! beta = "fr"                   # zero | const:<c> | fr | prp | hs | dy | hz[:<mu>] | hyb1 | hyb2
//! clip = "clip-decay:0.8"       # clip | clip-decay:<eta> | raw
//! init = [1.0, 1.0, 1.0, 1.0]
//!
//! [discriminator]
//! schedule = "power:0.01:0.6"
//! beta = "fr"
//! clip = "clip-decay:0.6"
//! init = [1.0, 1.0, 1.0, 1.0]
//!
//! [grid]                        # optional, used by the grid command
//! rates_g = [1e-2, 1e-3]
//! rates_d = [1e-2, 1e-3]
//! betas = ["zero", "fr", "prp"]
//! seeds = [1, 2, 3]
//!
//! [output]
//! dir = "out"
//!
//! [metrics]                     # optional equilibrium-gap reporting
//! vi = true
//! fit_min = 100
//! fit_max = 10000
//! fit_points = 200
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::beta::{BetaKind, BetaRule, ClipMode};
use crate::error::{Error, Result};
use crate::game::{GameProblem, LinearQuadraticGame, ToyGame};
use crate::schedule::Schedule;
use crate::solver::{PlayerConfig, RunConfig};
use crate::vector::ParameterVector;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSpec {
    problem: Option<ProblemSection>,
    run: Option<RunSection>,
    generator: Option<PlayerSection>,
    discriminator: Option<PlayerSection>,
    grid: Option<GridSection>,
    output: Option<OutputSection>,
    metrics: Option<MetricsSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    name: String,
    seed: Option<u64>,
    noise_sigma: Option<f64>,
    noise_dataset_len: Option<usize>,
    dim_theta: Option<usize>,
    dim_w: Option<usize>,
    dataset_len: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    seed: Option<u64>,
    steps: Option<u64>,
    batch_size: Option<usize>,
    trace_stride: Option<u64>,
    record_iterates: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlayerSection {
    schedule: String,
    beta: Option<String>,
    clip: Option<String>,
    init: Vec<f64>,
    init_direction: Option<Vec<f64>>,
    projection_radius: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    rates_g: Option<Vec<f64>>,
    rates_d: Option<Vec<f64>>,
    betas: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
    max_cells: Option<usize>,
    jobs: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricsSection {
    vi: Option<bool>,
    fit_min: Option<u64>,
    fit_max: Option<u64>,
    fit_points: Option<usize>,
}

/// Which problem to build, with its data seed. The data seed is independent
/// of the run seed so sweeps can vary one without the other.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    Toy {
        noise_sigma: f64,
        noise_dataset_len: usize,
        seed: u64,
    },
    LinearQuadratic {
        dim_theta: usize,
        dim_w: usize,
        dataset_len: usize,
        seed: u64,
    },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Box<dyn GameProblem>> {
        match *self {
            ProblemSpec::Toy {
                noise_sigma,
                noise_dataset_len,
                seed,
            } => {
                if noise_sigma == 0.0 {
                    Ok(Box::new(ToyGame::new()))
                } else {
                    Ok(Box::new(ToyGame::with_noise(
                        noise_sigma,
                        noise_dataset_len,
                        seed,
                    )?))
                }
            }
            ProblemSpec::LinearQuadratic {
                dim_theta,
                dim_w,
                dataset_len,
                seed,
            } => Ok(Box::new(LinearQuadraticGame::new(
                dim_theta,
                dim_w,
                dataset_len,
                seed,
            )?)),
        }
    }

    /// Short label used in output file names.
    pub fn label(&self) -> &'static str {
        match self {
            ProblemSpec::Toy { .. } => "toy",
            ProblemSpec::LinearQuadratic { .. } => "linear-quadratic",
        }
    }
}

/// Grid-sweep axes. Empty axes mean "keep the base config value".
#[derive(Clone, Debug, Default)]
pub struct GridSpec {
    pub rates_g: Vec<f64>,
    pub rates_d: Vec<f64>,
    pub betas: Vec<BetaKind>,
    pub seeds: Vec<u64>,
    pub max_cells: usize,
    pub jobs: Option<usize>,
}

pub const DEFAULT_MAX_CELLS: usize = 10_000;

/// Equilibrium-gap reporting options.
#[derive(Clone, Copy, Debug)]
pub struct MetricsSpec {
    pub vi: bool,
    pub fit_window: Option<(u64, u64)>,
    pub fit_points: usize,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            vi: false,
            fit_window: None,
            fit_points: 200,
        }
    }
}

/// A fully validated experiment: problem, base run, sweep axes, outputs.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub run: RunConfig,
    pub grid: GridSpec,
    pub output_dir: PathBuf,
    pub metrics: MetricsSpec,
}

/// Settings for the canonical toy comparison study.
#[derive(Clone, Debug)]
pub struct ToyStudySpec {
    pub steps: u64,
    pub init: (f64, f64),
    pub output_dir: PathBuf,
}

/// Parsed but not yet validated config file.
#[derive(Debug)]
pub struct RawConfig {
    spec: FileSpec,
}

pub fn load(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config '{}': {e}", path.display()))
    })?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RawConfig> {
    let spec: FileSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    Ok(RawConfig { spec })
}

fn parse_player(section: &PlayerSection, who: &str, dim: usize) -> Result<PlayerConfig> {
    let schedule = Schedule::from_str(&section.schedule)
        .map_err(|e| Error::Config(format!("[{who}] schedule: {e}")))?;
    let kind = match &section.beta {
        Some(s) => {
            BetaKind::from_str(s).map_err(|e| Error::Config(format!("[{who}] beta: {e}")))?
        }
        None => BetaKind::Zero,
    };
    let clip = match &section.clip {
        Some(s) => {
            ClipMode::from_str(s).map_err(|e| Error::Config(format!("[{who}] clip: {e}")))?
        }
        None => ClipMode::ClampHalf,
    };
    let beta = BetaRule::new(kind, clip).map_err(|e| Error::Config(format!("[{who}]: {e}")))?;
    if section.init.len() != dim {
        return Err(Error::Config(format!(
            "[{who}] init has {} entries, problem needs {dim}",
            section.init.len()
        )));
    }
    let init = ParameterVector::new(section.init.clone())
        .map_err(|e| Error::Config(format!("[{who}] init: {e}")))?;
    let init_direction = match &section.init_direction {
        Some(v) => {
            if v.len() != dim {
                return Err(Error::Config(format!(
                    "[{who}] init_direction has {} entries, problem needs {dim}",
                    v.len()
                )));
            }
            Some(
                ParameterVector::new(v.clone())
                    .map_err(|e| Error::Config(format!("[{who}] init_direction: {e}")))?,
            )
        }
        None => None,
    };
    if let Some(r) = section.projection_radius {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Config(format!(
                "[{who}] projection_radius must be > 0, got {r}"
            )));
        }
    }
    Ok(PlayerConfig {
        schedule,
        beta,
        init,
        init_direction,
        projection_radius: section.projection_radius,
    })
}

fn parse_problem(section: Option<&ProblemSection>) -> Result<ProblemSpec> {
    let Some(p) = section else {
        return Ok(ProblemSpec::Toy {
            noise_sigma: 0.0,
            noise_dataset_len: 1,
            seed: 1,
        });
    };
    let seed = p.seed.unwrap_or(1);
    match p.name.as_str() {
        "toy" => {
            for (key, set) in [
                ("dim_theta", p.dim_theta.is_some()),
                ("dim_w", p.dim_w.is_some()),
                ("dataset_len", p.dataset_len.is_some()),
            ] {
                if set {
                    return Err(Error::Config(format!(
                        "[problem] {key} does not apply to the toy problem"
                    )));
                }
            }
            let noise_sigma = p.noise_sigma.unwrap_or(0.0);
            let noise_dataset_len = p.noise_dataset_len.unwrap_or(64);
            if noise_sigma == 0.0 && p.noise_dataset_len.is_some() {
                return Err(Error::Config(
                    "[problem] noise_dataset_len needs noise_sigma > 0".into(),
                ));
            }
            Ok(ProblemSpec::Toy {
                noise_sigma,
                noise_dataset_len: if noise_sigma == 0.0 { 1 } else { noise_dataset_len },
                seed,
            })
        }
        "linear-quadratic" => {
            for (key, set) in [
                ("noise_sigma", p.noise_sigma.is_some()),
                ("noise_dataset_len", p.noise_dataset_len.is_some()),
            ] {
                if set {
                    return Err(Error::Config(format!(
                        "[problem] {key} applies only to the toy problem"
                    )));
                }
            }
            Ok(ProblemSpec::LinearQuadratic {
                dim_theta: p.dim_theta.unwrap_or(LinearQuadraticGame::DEFAULT_DIM),
                dim_w: p.dim_w.unwrap_or(LinearQuadraticGame::DEFAULT_DIM),
                dataset_len: p.dataset_len.unwrap_or(LinearQuadraticGame::DEFAULT_DATASET_LEN),
                seed,
            })
        }
        other => Err(Error::Config(format!(
            "[problem] unknown name '{other}' (expected 'toy' or 'linear-quadratic')"
        ))),
    }
}

impl RawConfig {
    /// Validates the full experiment shape needed by the run and grid
    /// commands: problem, run, and both player sections.
    pub fn experiment(&self) -> Result<ExperimentSpec> {
        let spec = &self.spec;
        let problem = parse_problem(spec.problem.as_ref())?;
        let built = problem.build()?;

        let run_section = spec
            .run
            .as_ref()
            .ok_or_else(|| Error::Config("missing [run] section".into()))?;
        let steps = run_section
            .steps
            .ok_or_else(|| Error::Config("[run] steps is required".into()))?;
        let gen_section = spec
            .generator
            .as_ref()
            .ok_or_else(|| Error::Config("missing [generator] section".into()))?;
        let disc_section = spec
            .discriminator
            .as_ref()
            .ok_or_else(|| Error::Config("missing [discriminator] section".into()))?;
        let generator = parse_player(gen_section, "generator", built.dim_theta())?;
        let discriminator = parse_player(disc_section, "discriminator", built.dim_w())?;

        let metrics = match &spec.metrics {
            Some(m) => {
                let fit_window = match (m.fit_min, m.fit_max) {
                    (None, None) => None,
                    (lo, hi) => {
                        let lo = lo.unwrap_or(1);
                        let hi = hi.unwrap_or(steps);
                        if lo == 0 || hi < lo {
                            return Err(Error::Config(format!(
                                "[metrics] invalid fit window [{lo}, {hi}]"
                            )));
                        }
                        Some((lo, hi))
                    }
                };
                let fit_points = m.fit_points.unwrap_or(200);
                if fit_points < 5 {
                    return Err(Error::Config(
                        "[metrics] fit_points must be at least 5".into(),
                    ));
                }
                MetricsSpec {
                    vi: m.vi.unwrap_or(false),
                    fit_window,
                    fit_points,
                }
            }
            None => MetricsSpec::default(),
        };

        let mut run = RunConfig {
            seed: run_section.seed.unwrap_or(0),
            steps,
            batch_size: run_section.batch_size.unwrap_or(1),
            generator,
            discriminator,
            trace_stride: run_section.trace_stride.unwrap_or(1),
            record_iterates: run_section.record_iterates.unwrap_or(false),
        };
        if metrics.vi {
            // the gap averages need every post-update iterate
            if run_section.trace_stride.is_some_and(|s| s != 1) {
                return Err(Error::Config(
                    "[metrics] vi = true needs trace_stride = 1".into(),
                ));
            }
            run.trace_stride = 1;
            run.record_iterates = true;
        }

        let grid = match &spec.grid {
            Some(g) => {
                let mut betas = Vec::new();
                for s in g.betas.clone().unwrap_or_default() {
                    betas.push(
                        BetaKind::from_str(&s)
                            .map_err(|e| Error::Config(format!("[grid] betas: {e}")))?,
                    );
                }
                for (axis, rates) in [("rates_g", &g.rates_g), ("rates_d", &g.rates_d)] {
                    for &r in rates.iter().flat_map(|v| v.iter()) {
                        if !(r.is_finite() && r > 0.0) {
                            return Err(Error::Config(format!(
                                "[grid] {axis} entries must be > 0, got {r}"
                            )));
                        }
                    }
                }
                if let Some(j) = g.jobs {
                    if j == 0 {
                        return Err(Error::Config("[grid] jobs must be >= 1".into()));
                    }
                }
                GridSpec {
                    rates_g: g.rates_g.clone().unwrap_or_default(),
                    rates_d: g.rates_d.clone().unwrap_or_default(),
                    betas,
                    seeds: g.seeds.clone().unwrap_or_default(),
                    max_cells: g.max_cells.unwrap_or(DEFAULT_MAX_CELLS),
                    jobs: g.jobs,
                }
            }
            None => GridSpec {
                max_cells: DEFAULT_MAX_CELLS,
                ..GridSpec::default()
            },
        };

        let output_dir = PathBuf::from(
            spec.output
                .as_ref()
                .and_then(|o| o.dir.clone())
                .unwrap_or_else(|| "out".into()),
        );

        Ok(ExperimentSpec {
            problem,
            run,
            grid,
            output_dir,
            metrics,
        })
    }

    /// Validates the (much smaller) shape needed by the toy study command.
    /// Only `[run] steps`, the two scalar `init` values, and `[output] dir`
    /// are consulted; everything else may be omitted.
    pub fn toy_study(&self) -> Result<ToyStudySpec> {
        let spec = &self.spec;
        if let Some(p) = &spec.problem {
            if p.name != "toy" {
                return Err(Error::Config(format!(
                    "the toy study runs on the toy problem, config names '{}'",
                    p.name
                )));
            }
        }
        let steps = spec.run.as_ref().and_then(|r| r.steps).unwrap_or(400);
        if steps == 0 {
            return Err(Error::Config("[run] steps must be >= 1".into()));
        }
        let scalar = |section: Option<&PlayerSection>, who: &str, default: f64| -> Result<f64> {
            match section {
                None => Ok(default),
                Some(s) => {
                    if s.init.len() != 1 {
                        return Err(Error::Config(format!(
                            "[{who}] init must be a single value for the toy problem"
                        )));
                    }
                    Ok(s.init[0])
                }
            }
        };
        let x0 = scalar(spec.generator.as_ref(), "generator", 0.5)?;
        let y0 = scalar(spec.discriminator.as_ref(), "discriminator", 9.0)?;
        let output_dir = PathBuf::from(
            spec.output
                .as_ref()
                .and_then(|o| o.dir.clone())
                .unwrap_or_else(|| "out".into()),
        );
        Ok(ToyStudySpec {
            steps,
            init: (x0, y0),
            output_dir,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beta::BetaKind;

    const FULL: &str = r#"
[problem]
name = "linear-quadratic"
seed = 3
dim_theta = 4
dim_w = 4
dataset_len = 64

[run]
seed = 7
steps = 500
batch_size = 2
trace_stride = 1

[generator]
schedule = "power:0.02:0.8"
beta = "fr"
clip = "clip-decay:0.8"
init = [1.0, 1.0, 1.0, 1.0]

[discriminator]
schedule = "power:0.01:0.6"
beta = "hz:0.5"
clip = "clip"
init = [0.0, 0.0, 0.0, 0.0]
projection_radius = 50.0

[grid]
rates_g = [1e-2, 1e-3]
rates_d = [1e-2]
betas = ["zero", "fr", "hyb2"]
seeds = [1, 2]

[output]
dir = "results"

[metrics]
vi = true
fit_min = 100
fit_max = 500
"#;

    #[test]
    fn full_config_parses_into_a_spec() {
        let spec = parse(FULL).unwrap().experiment().unwrap();
        assert_eq!(
            spec.problem,
            ProblemSpec::LinearQuadratic {
                dim_theta: 4,
                dim_w: 4,
                dataset_len: 64,
                seed: 3
            }
        );
        assert_eq!(spec.run.seed, 7);
        assert_eq!(spec.run.steps, 500);
        assert_eq!(spec.run.batch_size, 2);
        assert_eq!(spec.run.generator.beta.kind(), BetaKind::FletcherReeves);
        assert_eq!(
            spec.run.discriminator.beta.kind(),
            BetaKind::HagerZhang { mu: 0.5 }
        );
        assert_eq!(spec.run.discriminator.projection_radius, Some(50.0));
        assert_eq!(spec.grid.rates_g, vec![1e-2, 1e-3]);
        assert_eq!(spec.grid.betas.len(), 3);
        assert_eq!(spec.grid.max_cells, DEFAULT_MAX_CELLS);
        assert_eq!(spec.output_dir.to_str(), Some("results"));
        assert!(spec.metrics.vi);
        assert_eq!(spec.metrics.fit_window, Some((100, 500)));
        // vi forces dense snapshots
        assert_eq!(spec.run.trace_stride, 1);
        assert!(spec.run.record_iterates);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let bad = FULL.replace("batch_size = 2", "batch_sise = 2");
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("batch_sise"), "{err}");

        let bad = format!("{FULL}\n[extra]\nx = 1\n");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn vi_conflicts_with_an_explicit_sparse_stride() {
        let bad = FULL.replace("trace_stride = 1", "trace_stride = 10");
        // stride 10 with vi = true cannot produce the per-step series
        let err = parse(&bad).unwrap().experiment().unwrap_err().to_string();
        assert!(err.contains("trace_stride"), "{err}");
    }

    #[test]
    fn missing_sections_are_reported() {
        for section in ["[run]", "[generator]", "[discriminator]"] {
            let mut lines: Vec<&str> = FULL.lines().collect();
            let start = lines.iter().position(|l| l.trim() == section).unwrap();
            let mut end = start + 1;
            while end < lines.len() && !lines[end].trim_start().starts_with('[') {
                end += 1;
            }
            lines.drain(start..end);
            let text = lines.join("\n");
            let err = parse(&text).unwrap().experiment().unwrap_err().to_string();
            assert!(
                err.contains(section.trim_matches(['[', ']'])),
                "{section}: {err}"
            );
        }
    }

    #[test]
    fn init_length_must_match_the_problem() {
        let bad = FULL.replace("init = [1.0, 1.0, 1.0, 1.0]", "init = [1.0, 1.0]");
        let err = parse(&bad).unwrap().experiment().unwrap_err().to_string();
        assert!(err.contains("init"), "{err}");
    }

    #[test]
    fn toy_problem_rejects_quadratic_only_keys() {
        let text = r#"
[problem]
name = "toy"
dim_theta = 2

[run]
steps = 10

[generator]
schedule = "const:1e-7"
init = [0.5]

[discriminator]
schedule = "const:1e-6"
init = [9.0]
"#;
        let err = parse(text).unwrap().experiment().unwrap_err().to_string();
        assert!(err.contains("dim_theta"), "{err}");
    }

    #[test]
    fn toy_defaults_build_a_noiseless_problem() {
        let text = r#"
[run]
steps = 10

[generator]
schedule = "const:1e-7"
init = [0.5]

[discriminator]
schedule = "const:1e-6"
init = [9.0]
"#;
        let spec = parse(text).unwrap().experiment().unwrap();
        assert_eq!(
            spec.problem,
            ProblemSpec::Toy {
                noise_sigma: 0.0,
                noise_dataset_len: 1,
                seed: 1
            }
        );
        let problem = spec.problem.build().unwrap();
        assert_eq!(problem.dataset_len(), 1);
        assert_eq!(spec.run.batch_size, 1);
        assert_eq!(spec.output_dir.to_str(), Some("out"));
        assert!(!spec.metrics.vi);
    }

    #[test]
    fn noise_settings_build_the_stochastic_toy() {
        let text = r#"
[problem]
name = "toy"
noise_sigma = 0.5
noise_dataset_len = 16
seed = 9

[run]
steps = 10

[generator]
schedule = "const:1e-7"
init = [0.5]

[discriminator]
schedule = "const:1e-6"
init = [9.0]
"#;
        let spec = parse(text).unwrap().experiment().unwrap();
        let problem = spec.problem.build().unwrap();
        assert_eq!(problem.dataset_len(), 16);

        let contradictory = text.replace("noise_sigma = 0.5", "noise_sigma = 0.0");
        assert!(parse(&contradictory).unwrap().experiment().is_err());
    }

    #[test]
    fn grid_rates_must_be_positive() {
        let bad = FULL.replace("rates_g = [1e-2, 1e-3]", "rates_g = [1e-2, -1e-3]");
        assert!(parse(&bad).unwrap().experiment().is_err());
        let bad = FULL.replace("seeds = [1, 2]", "seeds = [1, 2]\njobs = 0");
        assert!(parse(&bad).unwrap().experiment().is_err());
    }

    #[test]
    fn bad_tokens_name_their_section() {
        for (from, to, needle) in [
            ("beta = \"fr\"", "beta = \"frr\"", "generator"),
            ("schedule = \"power:0.02:0.8\"", "schedule = \"poower:0.02\"", "generator"),
            ("clip = \"clip\"", "clip = \"clamp\"", "discriminator"),
            ("beta = \"hz:0.5\"", "beta = \"hz:0.1\"", "discriminator"),
        ] {
            let bad = FULL.replace(from, to);
            assert_ne!(bad, FULL, "replacement {from} did not apply");
            let err = parse(&bad).unwrap().experiment().unwrap_err().to_string();
            assert!(err.contains(needle), "{from} -> {to}: {err}");
        }
    }

    #[test]
    fn toy_study_defaults_and_overrides() {
        let spec = parse("").unwrap().toy_study().unwrap();
        assert_eq!(spec.steps, 400);
        assert_eq!(spec.init, (0.5, 9.0));
        assert_eq!(spec.output_dir.to_str(), Some("out"));

        let text = r#"
[run]
steps = 50

[generator]
schedule = "const:1e-7"
init = [0.25]

[discriminator]
schedule = "const:1e-6"
init = [4.0]

[output]
dir = "toyout"
"#;
        let spec = parse(text).unwrap().toy_study().unwrap();
        assert_eq!(spec.steps, 50);
        assert_eq!(spec.init, (0.25, 4.0));
        assert_eq!(spec.output_dir.to_str(), Some("toyout"));

        let wrong_problem = r#"
[problem]
name = "linear-quadratic"
"#;
        assert!(parse(wrong_problem).unwrap().toy_study().is_err());
    }
}
