//! Deterministic quadrature tooling for Bayesian inverse problems on the
//! line, with an empirical well-posedness workbench.
//!
//! The library computes posteriors by trapezoid quadrature ([`bayes`]),
//! measures distances between them in five metrics — Hellinger, total
//! variation, Prokhorov, Wasserstein(p), and Kullback–Leibler ([`metrics`]) —
//! and sweeps the observed data to estimate how the posterior moves when the
//! data does ([`sweep`]). A small Gaussian-field module ([`gpfield`])
//! carries the same stability experiment out on lattice images. Everything
//! is deterministic: fixed seeds, fixed quadrature, byte-identical reruns.

pub mod bayes;
pub mod config;
pub mod gpfield;
pub mod maxflow;
pub mod measures;
pub mod metrics;
pub mod plot;
pub mod runner;
pub mod sweep;
