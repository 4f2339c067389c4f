//! Probabilistic hosting capacity analysis for radial distribution feeders.
//!
//! The library answers one question: how much distributed generation can be
//! installed at a set of candidate nodes of a radial feeder so that operating
//! limits hold on all but an acceptable fraction of historical days?
//! Formally it maximises total installed capacity `1'psi` over the box
//! `[0, psi_max]` subject to an empirical violation probability
//! `eps_hat(psi) <= eps_bar`, where `eps_hat` is estimated day by day from a
//! scenario set of load and irradiance profiles.
//!
//! The pieces, bottom up:
//!
//! * [`network`]: feeder model (nodes, lines, candidate nodes) and its JSON
//!   form, plus the injection map from capacities and scenarios to nodal
//!   power injections.
//! * [`scenario`]: day-resolved scenario sets, CSV storage, and a seeded
//!   synthetic generator.
//! * [`distflow`]: branch-flow power flow for radial networks via
//!   backward/forward sweeps, and operating-limit checks.
//! * [`risk`]: sample-average violation probability over days and the
//!   penalised capacity objective.
//! * [`gp`]: Gaussian-process regression with anisotropic Matern 5/2 and
//!   squared-exponential kernels, fitted by multi-start likelihood ascent.
//! * [`acquisition`]: expected improvement and probability of improvement,
//!   with a deterministic multi-start maximiser.
//! * [`solvers`]: the Bayesian optimisation loop plus pattern-search and
//!   exhaustive-grid baselines, all emitting comparable query traces.
//! * [`cli`]: the `phca` command-line front end.
//!
//! Every randomised routine takes an explicit seed and is deterministic for
//! a given seed and input, independent of thread count.

// Validation deliberately writes `!(x > 0.0)` instead of `x <= 0.0`: the
// negated form also rejects NaN, which must never pass as a valid input.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod cli;
pub mod distflow;
pub mod fixtures;
mod fsutil;
pub mod golden;
pub mod gp;
pub mod network;
pub mod risk;
pub mod scenario;
pub mod solvers;
