use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gamecg::config;
use gamecg::experiment::{report_toy, run_grid, run_single};
use gamecg::metrics::{fit_rate, read_metrics_csv};
use gamecg::Error;

/// Two-timescale stochastic conjugate-gradient solvers for two-player games.
#[derive(Parser)]
#[command(name = "gamecg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured experiment and write its trace (and metrics).
    Run {
        /// TOML config file
        config: PathBuf,
    },
    /// Sweep rates, conjugacy rules, and seeds; write per-cell traces and a
    /// summary table.
    Grid {
        /// TOML config file
        config: PathBuf,
    },
    /// Reproduce the deterministic toy comparison study.
    Toy {
        /// TOML config file (only steps, init values, and output dir apply)
        config: PathBuf,
    },
    /// Fit power-law rates to the columns of a metrics CSV.
    Fit {
        /// metrics CSV produced by a run with [metrics] vi = true
        metrics: PathBuf,
        /// lower edge of the fit window (step count)
        #[arg(long)]
        min: Option<f64>,
        /// upper edge of the fit window (step count)
        #[arg(long)]
        max: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version as "errors"; keep their exit 0
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Diverged { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config } => {
            let spec = config::load(&config)?.experiment()?;
            let report = run_single(&spec)?;
            println!("run: {} steps on {}", report.steps, spec.problem.label());
            println!("timescales: {}", report.regime);
            println!(
                "final: |grad_g| = {:.6e}, |grad_d| = {:.6e}, loss_g = {:.6e}, loss_d = {:.6e}",
                report.final_grad_norm_g,
                report.final_grad_norm_d,
                report.final_loss_g,
                report.final_loss_d
            );
            println!("trace: {}", report.trace_path.display());
            if let Some(m) = &report.metrics {
                println!("metrics: {}", m.csv_path.display());
                for (who, fit) in [("A_G", &m.fit_g), ("A_D", &m.fit_d)] {
                    println!(
                        "fit {who}: slope = {:+.4}, r^2 = {:.4} over [{}, {}] \
                         ({} points, {} dropped)",
                        fit.slope,
                        fit.r_squared,
                        fit.window.0,
                        fit.window.1,
                        fit.points_used,
                        fit.points_dropped
                    );
                }
            }
            Ok(())
        }
        Command::Grid { config } => {
            let spec = config::load(&config)?.experiment()?;
            let table = run_grid(&spec)?;
            println!(
                "grid: {} cells ({} divergent), summary at {}",
                table.rows.len(),
                table.divergent_count(),
                gamecg::experiment::summary_path(&spec.output_dir).display()
            );
            Ok(())
        }
        Command::Toy { config } => {
            let spec = config::load(&config)?.toy_study()?;
            let lines = report_toy(&spec)?;
            println!(
                "toy study: {} runs from (x, y) = ({}, {}), outputs in {}",
                lines.len(),
                spec.init.0,
                spec.init.1,
                spec.output_dir.display()
            );
            for l in &lines {
                println!(
                    "{:-10} {:-6} distance {:.4e} -> {:.4e}, objective gap {:.4e} -> {:.4e}, \
                     norm nonincreasing {:.1}%",
                    l.method,
                    l.schedule,
                    l.initial_distance,
                    l.final_distance,
                    l.initial_objective_gap,
                    l.final_objective_gap,
                    100.0 * l.norm_nonincreasing_fraction
                );
            }
            Ok(())
        }
        Command::Fit { metrics, min, max } => {
            let file = std::fs::File::open(&metrics).map_err(|e| {
                Error::Config(format!("cannot open '{}': {e}", metrics.display()))
            })?;
            let (header, columns) = read_metrics_csv(std::io::BufReader::new(file))?;
            let steps = &columns[0];
            let lo = min.unwrap_or_else(|| steps.iter().copied().fold(f64::INFINITY, f64::min));
            let hi = max.unwrap_or_else(|| steps.iter().copied().fold(0.0, f64::max));
            for (name, column) in header.iter().zip(&columns).skip(1) {
                let points: Vec<(f64, f64)> =
                    steps.iter().copied().zip(column.iter().copied()).collect();
                match fit_rate(&points, (lo, hi)) {
                    Ok(fit) => println!(
                        "{name}: slope = {:+.4}, r^2 = {:.4} ({} points, {} dropped)",
                        fit.slope, fit.r_squared, fit.points_used, fit.points_dropped
                    ),
                    Err(e) => println!("{name}: no fit ({e})"),
                }
            }
            Ok(())
        }
    }
}
