//! Stochastic conjugate-gradient methods for two-player smooth games.
//!
//! This crate implements a two-timescale solver that searches for local Nash
//! equilibria of finite-sum min-max problems. Each player follows a nonlinear
//! conjugate-gradient direction built from minibatch gradients: the
//! discriminator (maximizing player) moves first, the generator
//! (minimizing player) moves second, and both gradients are evaluated at the
//! pre-update iterate pair. Plain SGD and heavy-ball momentum fall out as the
//! degenerate cases `beta = 0` and `beta = const`.
//!
//! The main entry points:
//!
//! * [`solver::run`] drives Algorithm steps for any [`game::GameProblem`],
//!   producing a [`solver::Trace`].
//! * [`beta`] houses the conjugacy coefficient rules (Fletcher-Reeves,
//!   Polak-Ribiere, Hestenes-Stiefel, Dai-Yuan, Hager-Zhang and the two
//!   classical hybrids) together with their clipping modes.
//! * [`schedule`] provides constant, power-decay and step-decay learning
//!   rates, plus a diagnostic that classifies two-timescale pairs.
//! * [`metrics`] computes seed-averaged variational-inequality gaps and fits
//!   empirical convergence rates by log-log least squares.
//! * [`experiment`] runs learning-rate grids and the closed-form bilinear
//!   toy study end to end, writing CSV artifacts.
//!
//! The `examples/` directory is the guided tour: each file is a runnable
//! demonstration of one capability (`cargo run --release --example toy_minimax`,
//! `... --example convergence_rates`, and so on). The `gamecg` binary wraps
//! the same library calls behind `run`, `grid`, `toy` and `fit` subcommands
//! driven by a TOML config.

pub mod beta;
pub mod config;
pub mod error;
pub mod experiment;
pub mod game;
pub mod metrics;
pub mod schedule;
pub mod solver;
pub mod vector;

pub use error::{Error, Result};
