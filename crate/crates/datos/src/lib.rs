//! Desk-scale testbed for parameter-free decentralized composite
//! optimization over simulated gossip networks.
//!
//! The problem is `min u(x) = f(x) + r(x)` with `f = (1/m) Σ fᵢ` split
//! across `m` agents (smooth, convex) and `r` a shared nonsmooth convex
//! regularizer. The solvers of interest run adaptive three-operator
//! splitting with backtracked stepsizes — no Lipschitz constants anywhere:
//!
//! - [`solvers::global_datos_step`]: one network-wide stepsize agreed via a
//!   min broadcast each iteration.
//! - [`solvers::local_datos_step`]: per-agent stepsizes consensed over
//!   graph neighborhoods, two scalar gossip rounds instead of a broadcast.
//! - [`solvers::davis_yin_reference_step`]: the stacked operator-splitting
//!   recursion the gossip form was derived from, kept as an executable
//!   cross-check (it needs dense matrix square roots, so it never scales).
//! - [`solvers::pg_extra_step`]: a fixed-stepsize first-order baseline.
//! - [`solvers::centralized_proxgrad`]: the single-machine oracle that
//!   anchors every optimality-gap metric.
//!
//! Everything is deterministic given the seeds in a config: graphs,
//! synthetic instances, and initial states all draw from counter-based
//! generators, and row-parallel execution (the default `parallel` feature)
//! produces bit-identical results to the sequential fallback.
//!
//! [`harness::run_experiment`] wires a parsed [`config::ExperimentConfig`]
//! into a full run: oracle solve, iteration loop, per-iteration metrics
//! rows, communication ledger, and ergodic averages. [`selftest`] bundles
//! the fast invariant checks the CLI exposes.

pub mod config;
pub mod error;
pub mod exec;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod linesearch;
pub mod mixing;
pub mod problems;
pub mod selftest;
pub mod solvers;

pub use error::{Error, Result};
