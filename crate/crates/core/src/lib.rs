//! Decentralized stochastic optimization with zeroth-order oracles.
//!
//! `n` agents on an undirected graph cooperatively minimize
//! `f(x) = (1/n) Σ_i E[F_i(x, ξ_i)]` seeing only function values. Each round,
//! every agent mixes with its neighbors through the graph Laplacian and steps
//! along a random-coordinate finite-difference estimate, optionally passed
//! through the powerball map `sgn(g)|g|^γ`.
//!
//! | module | contents |
//! |--------|----------|
//! | [`graph`] | topologies, Erdős–Rényi sampling, Laplacian spectra |
//! | [`estimator`] | forward / central coordinate estimators, smoothing schedules |
//! | [`dynamics`] | ZOOM and ZOOM-PB rounds, run loop, step-size rules |
//! | [`problems`] | classification benchmark and quadratic toy |
//! | [`metrics`] | per-iteration records, summaries, CSV, assumption probes |
//! | [`harness`] | config files, seeded batteries, γ sweeps, self-check |

pub mod dynamics;
pub mod estimator;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod problems;
pub mod rng;

pub use dynamics::{Algorithm, HyperParams, Init, RunError, SwarmState};
pub use estimator::{Estimator, SmoothingSchedule};
pub use graph::{SpectralProfile, Topology};
pub use metrics::{IterationRecord, Summary, Trajectory};
pub use problems::StochasticProblem;
