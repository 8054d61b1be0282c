//! Stationarity, consensus and loss measurements over trajectories.
//!
//! Gradients reported here are the analytic full-batch ones. The optimizers
//! never see them.

use std::fmt::Write as _;
use std::io;

use rand::Rng;
use thiserror::Error;

use crate::dynamics::{Algorithm, SwarmState};
use crate::problems::StochasticProblem;

pub const CSV_HEADER: &str = "k,mean_train_loss,grad_norm_sq,grad_norm_1pg_sq,consensus_err,oracle_calls,wall_ms";

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("trajectory has no records")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `f(x̄_k)`, full batch.
    pub mean_train_loss: f64,
    /// `‖∇f(x̄_k)‖²`.
    pub grad_norm_sq: f64,
    /// `‖∇f(x̄_k)‖²_{1+γ}`.
    pub grad_norm_1pg_sq: f64,
    /// `(1/n) Σ_i ‖x_{i,k} − x̄_k‖²`.
    pub consensus_err: f64,
    pub oracle_calls: u64,
    pub wall_ms: f64,
}

/// Output of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub algorithm: Algorithm,
    /// Exponent the run applied (1 for ZOOM and the baseline).
    pub gamma: f64,
    pub horizon: usize,
    pub records: Vec<IterationRecord>,
    /// Test accuracy at the final mean iterate, when the problem has a test set.
    pub accuracy: Option<f64>,
    /// `f*`, when known.
    pub optimum: Option<f64>,
    pub final_state: SwarmState,
}

impl Trajectory {
    pub fn initial_loss(&self) -> f64 {
        self.records.first().map_or(f64::NAN, |r| r.mean_train_loss)
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.mean_train_loss)
    }

    /// First recorded iteration whose loss is at most `target`.
    pub fn first_reaching(&self, target: f64) -> Option<usize> {
        self.records.iter().find(|r| r.mean_train_loss <= target).map(|r| r.k)
    }
}

/// `‖v‖²_q` with `q = 1 + γ`. Exactly `Σ v_j²` at `γ = 1`.
pub fn norm_1pg_sq(v: &[f64], gamma: f64) -> f64 {
    if gamma == 1.0 {
        return v.iter().map(|x| x * x).sum();
    }
    let q = 1.0 + gamma;
    v.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(2.0 / q)
}

/// `(1/n) Σ_i ‖x_i − x̄‖²`.
pub fn consensus_error(state: &SwarmState) -> f64 {
    let mean = state.mean();
    let total: f64 = state
        .rows()
        .map(|r| r.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    total / state.agents() as f64
}

/// `‖X − 𝟙x̄ᵀ‖²_F / n` computed as `(‖X‖²_F − n‖x̄‖²)/n`.
pub fn consensus_error_frobenius(state: &SwarmState) -> f64 {
    let n = state.agents() as f64;
    let mean = state.mean();
    let fro: f64 = state.as_slice().iter().map(|v| v * v).sum();
    let m2: f64 = mean.iter().map(|v| v * v).sum();
    ((fro - n * m2) / n).max(0.0)
}

pub fn observe<P: StochasticProblem>(
    problem: &P,
    state: &SwarmState,
    gamma: f64,
    oracle_calls: u64,
    wall_ms: f64,
) -> IterationRecord {
    let mean = state.mean();
    let grad = problem.global_gradient(&mean);
    IterationRecord {
        k: state.k,
        mean_train_loss: problem.loss(&mean),
        grad_norm_sq: grad.iter().map(|g| g * g).sum(),
        grad_norm_1pg_sq: norm_1pg_sq(&grad, gamma),
        consensus_err: consensus_error(state),
        oracle_calls,
        wall_ms,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub avg_grad_norm_sq: f64,
    pub avg_consensus_err: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_accuracy: Option<f64>,
    /// `f(x̄_T) − f*` when `f*` is known.
    pub final_gap: Option<f64>,
}

/// Simple means over the recorded iterations with `k < T` (all records if
/// there are none, i.e. `T = 0`).
pub fn summarize(traj: &Trajectory) -> Result<Summary, MetricsError> {
    let first = traj.records.first().ok_or(MetricsError::Empty)?;
    let last = traj.records.last().unwrap();
    let mut window: Vec<&IterationRecord> = traj.records.iter().filter(|r| r.k < traj.horizon).collect();
    if window.is_empty() {
        window = traj.records.iter().collect();
    }
    let len = window.len() as f64;
    Ok(Summary {
        avg_grad_norm_sq: window.iter().map(|r| r.grad_norm_sq).sum::<f64>() / len,
        avg_consensus_err: window.iter().map(|r| r.consensus_err).sum::<f64>() / len,
        initial_loss: first.mean_train_loss,
        final_loss: last.mean_train_loss,
        final_accuracy: traj.accuracy,
        final_gap: traj.optimum.map(|f| last.mean_train_loss - f),
    })
}

/// Locale-free number rendering: shortest round-trip decimal, switching to
/// exponent form for very small or very large magnitudes.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// CSV body for a trajectory. With `with_wall_time == false` the `wall_ms`
/// column is written as 0 so the output is reproducible byte for byte.
pub fn to_csv(traj: &Trajectory, with_wall_time: bool) -> String {
    let mut s = String::with_capacity(64 * (traj.records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in &traj.records {
        let wall = if with_wall_time { fmt_num(r.wall_ms) } else { "0".to_string() };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.k,
            fmt_num(r.mean_train_loss),
            fmt_num(r.grad_norm_sq),
            fmt_num(r.grad_norm_1pg_sq),
            fmt_num(r.consensus_err),
            r.oracle_calls,
            wall
        );
    }
    s
}

pub fn write_csv<W: io::Write>(traj: &Trajectory, with_wall_time: bool, mut w: W) -> io::Result<()> {
    w.write_all(to_csv(traj, with_wall_time).as_bytes())
}

/// Empirical lower bounds on the constants of the smoothness, variance and
/// similarity assumptions. Finite samples cannot certify the true bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionProbe {
    /// Largest per-coordinate RMS deviation of `∇F_i(x, ξ)` from `∇f_i(x)`.
    pub zeta_hat: f64,
    /// Largest `‖∇f_i(x) − ∇f(x)‖`.
    pub sigma2_hat: f64,
    /// Largest `‖∇F_i(x, ξ) − ∇F_i(y, ξ)‖ / ‖x − y‖` over consecutive points.
    pub lipschitz_hat: f64,
}

impl AssumptionProbe {
    /// `σ₁ = √p · ζ`.
    pub fn sigma1_hat(&self, p: usize) -> f64 {
        (p as f64).sqrt() * self.zeta_hat
    }
}

pub fn probe_assumptions<P: StochasticProblem, R: Rng + ?Sized>(
    problem: &P,
    points: &[Vec<f64>],
    draws_per_point: usize,
    rng: &mut R,
) -> AssumptionProbe {
    let (n, p) = (problem.agents(), problem.dimension());
    let mut zeta_sq = 0.0f64;
    let mut sigma2 = 0.0f64;
    for x in points {
        let global = problem.global_gradient(x);
        for i in 0..n {
            let local = problem.local_gradient(i, x);
            let diff: f64 = local.iter().zip(&global).map(|(a, b)| (a - b) * (a - b)).sum();
            sigma2 = sigma2.max(diff.sqrt());
            if draws_per_point == 0 {
                continue;
            }
            let mut acc = vec![0.0; p];
            for _ in 0..draws_per_point {
                let xi = problem.sample(i, rng);
                for (a, (g, l)) in acc.iter_mut().zip(problem.sample_gradient(i, x, &xi).iter().zip(&local)) {
                    *a += (g - l) * (g - l);
                }
            }
            let worst = acc.iter().fold(0.0f64, |m, v| m.max(*v)) / draws_per_point as f64;
            zeta_sq = zeta_sq.max(worst);
        }
    }
    let mut lipschitz = 0.0f64;
    for pair in points.windows(2) {
        let (x, y) = (&pair[0], &pair[1]);
        let dist = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist == 0.0 {
            continue;
        }
        for i in 0..n {
            let xi = problem.sample(i, rng);
            let gx = problem.sample_gradient(i, x, &xi);
            let gy = problem.sample_gradient(i, y, &xi);
            let d = gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            lipschitz = lipschitz.max(d / dist);
        }
    }
    AssumptionProbe { zeta_hat: zeta_sq.sqrt(), sigma2_hat: sigma2, lipschitz_hat: lipschitz }
}
