//! Synchronous multi-agent updates.
//!
//! Every round each agent `i` draws ξ, builds a direction `g_i` and moves to
//!
//! ```text
//! x_i ← x_i − α Σ_j L_ij x_j − η g_i
//! ```
//!
//! where `g_i` is a zeroth-order coordinate estimate (ZOOM), its powerball
//! transform `sgn(g)|g|^γ` (ZOOM-PB), or the exact stochastic gradient (the
//! first-order reference). All agents read the round-`k` iterates; the new
//! matrix is written to a fresh buffer.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::estimator::{sample_coordinates, EstimateError, Estimator, SmoothingSchedule};
use crate::graph::{self, GraphError, SpectralProfile, Topology};
use crate::metrics::{self, Trajectory};
use crate::problems::StochasticProblem;
use crate::rng::{self, Purpose};

/// Entries beyond this magnitude abort the run.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Fraction of `alpha_max` used when α is not given explicitly.
pub const DEFAULT_ALPHA_FRACTION: f64 = 0.9;

pub const DEFAULT_GAMMA: f64 = 0.7;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("topology is disconnected; decentralized consensus requires a connected graph")]
    Disconnected,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("problem has {problem} agents but topology has {topology}")]
    AgentMismatch { problem: usize, topology: usize },
    #[error("estimator failed at iteration {k}, agent {agent}: {source}")]
    Estimate { k: usize, agent: usize, source: EstimateError },
    #[error("iterate diverged at iteration {k}, agent {agent} (entry {value})")]
    Diverged { k: usize, agent: usize, value: f64 },
}

/// `sgn(v)|v|^γ`, elementwise. `γ = 1` returns the input unchanged.
pub fn powerball(v: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    powerball_in_place(&mut out, gamma);
    out
}

pub fn powerball_in_place(v: &mut [f64], gamma: f64) {
    if gamma == 1.0 {
        return;
    }
    for x in v.iter_mut() {
        *x = if *x == 0.0 { 0.0 } else { x.abs().powf(gamma).copysign(*x) };
    }
}

/// The `n × p` matrix of agent iterates at iteration `k`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    n: usize,
    p: usize,
    iterates: Vec<f64>,
    pub k: usize,
}

impl SwarmState {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self { n, p, iterates: vec![0.0; n * p], k: 0 }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == p), "ragged iterate matrix");
        Self { n, p, iterates: rows.concat(), k: 0 }
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.iterates[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.iterates.chunks(self.p.max(1)).take(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.iterates
    }

    /// `x̄ = (1/n) Σ_i x_i`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for r in self.rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }
}

/// `Σ_j L_ij x_j`. Only neighbors (and `i` itself) have nonzero `L_ij`.
pub fn consensus_term(profile: &SpectralProfile, state: &SwarmState, i: usize) -> Vec<f64> {
    let mut out = vec![0.0; state.p];
    for j in 0..state.n {
        let l = profile.laplacian[(i, j)];
        if l != 0.0 {
            for (o, x) in out.iter_mut().zip(state.row(j)) {
                *o += l * x;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Zoom,
    ZoomPb,
    /// Same loop with the exact stochastic gradient; a reference, not a
    /// zeroth-order method.
    FirstOrder,
}

impl Algorithm {
    /// Exponent actually applied to the direction. ZOOM is ZOOM-PB at `γ = 1`.
    pub fn effective_gamma(self, params: &HyperParams) -> f64 {
        match self {
            Self::ZoomPb => params.gamma,
            Self::Zoom | Self::FirstOrder => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Zoom => "zoom",
            Self::ZoomPb => "zoom_pb",
            Self::FirstOrder => "dsgd",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zoom" => Ok(Self::Zoom),
            "zoom_pb" | "zoom-pb" => Ok(Self::ZoomPb),
            "dsgd" | "baseline" | "first_order" => Ok(Self::FirstOrder),
            other => Err(format!("unknown algorithm `{other}` (expected zoom|zoom_pb|dsgd)")),
        }
    }
}

/// Starting iterates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zero,
    /// Independent `N(0, std²)` entries per agent.
    Gaussian { std: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Consensus step; must lie in `(0, alpha_max)` on multi-agent graphs.
    pub alpha: f64,
    pub eta: f64,
    /// Powerball exponent; only ZOOM-PB uses it.
    pub gamma: f64,
    /// Number of rounds `T`.
    pub horizon: usize,
    /// Coordinates per estimate.
    pub n_c: usize,
    pub estimator: Estimator,
    pub smoothing: SmoothingSchedule,
    pub init: Init,
    pub record_every: usize,
}

impl HyperParams {
    /// Theorem-faithful parameters for `n` agents in dimension `p`:
    /// `α = 0.9 alpha_max`, `η = √n/√(pT)`, decaying δ with `κ_δ = 1`.
    pub fn theorem(profile: &SpectralProfile, p: usize, horizon: usize) -> Self {
        let sched = theorem_schedule(profile.n(), p, horizon, 1.0);
        Self {
            alpha: DEFAULT_ALPHA_FRACTION * profile.alpha_max,
            eta: sched.eta,
            gamma: DEFAULT_GAMMA,
            horizon,
            n_c: 1,
            estimator: Estimator::Forward,
            smoothing: sched.smoothing,
            init: Init::Zero,
            record_every: 10,
        }
    }

    pub fn gamma_in_theory_range(&self) -> bool {
        (0.5..=1.0).contains(&self.gamma)
    }

    pub fn validate(&self, profile: &SpectralProfile, p: usize) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::InvalidParams(m));
        if profile.n() > 1 && !(self.alpha > 0.0 && self.alpha < profile.alpha_max) {
            return bad(format!("alpha {} outside (0, {})", self.alpha, profile.alpha_max));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta {} must be finite and nonnegative", self.eta));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if self.n_c == 0 || self.n_c > p {
            return bad(format!("n_c {} outside [1, {p}]", self.n_c));
        }
        if self.record_every == 0 {
            return bad("record_every must be positive".into());
        }
        if let Init::Gaussian { std } = self.init {
            if !(std >= 0.0 && std.is_finite()) {
                return bad(format!("init std {std} invalid"));
            }
        }
        self.smoothing.validate().map_err(|e| RunError::InvalidParams(e.to_string()))?;
        if !self.gamma_in_theory_range() {
            log::warn!("gamma {} is outside [0.5, 1]; convergence theory does not cover it", self.gamma);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremSchedule {
    pub eta: f64,
    pub smoothing: SmoothingSchedule,
    /// Whether `T ≥ n³/p`.
    pub premise_holds: bool,
}

/// `η = √n/√(pT)` with the decaying smoothing radius.
pub fn theorem_schedule(n: usize, p: usize, horizon: usize, kappa_delta: f64) -> TheoremSchedule {
    let (nf, pf, tf) = (n as f64, p as f64, horizon.max(1) as f64);
    let premise_holds = tf >= nf.powi(3) / pf;
    if !premise_holds {
        log::warn!("horizon {horizon} is below n^3/p = {:.1}; rate guarantees assume T >= n^3/p", nf.powi(3) / pf);
    }
    TheoremSchedule {
        eta: nf.sqrt() / (pf * tf).sqrt(),
        smoothing: SmoothingSchedule::TheoremDecay { kappa_delta },
        premise_holds,
    }
}

/// Per-agent random streams.
#[derive(Debug, Clone)]
pub struct AgentStreams {
    pub data: ChaCha8Rng,
    pub coordinates: ChaCha8Rng,
}

/// One [`AgentStreams`] per agent, derived from a master seed.
#[derive(Debug, Clone)]
pub struct SwarmRng {
    agents: Vec<AgentStreams>,
}

impl SwarmRng {
    pub fn new(master: u64, n: usize) -> Self {
        let agents = (0..n)
            .map(|i| AgentStreams {
                data: rng::stream(master, i, Purpose::Data),
                coordinates: rng::stream(master, i, Purpose::Coordinates),
            })
            .collect();
        Self { agents }
    }

    pub fn agent(&mut self, i: usize) -> &mut AgentStreams {
        &mut self.agents[i]
    }
}

/// Builds the initial state for `init` from the per-agent init streams.
pub fn initial_state(n: usize, p: usize, init: Init, master: u64) -> SwarmState {
    match init {
        Init::Zero => SwarmState::zeros(n, p),
        Init::Gaussian { std } => SwarmState::from_rows(
            (0..n)
                .map(|i| {
                    let mut r = rng::stream(master, i, Purpose::Init);
                    (0..p).map(|_| std * r.sample::<f64, _>(StandardNormal)).collect()
                })
                .collect(),
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    /// Agents of a round computed on the rayon pool.
    Parallel,
}

/// Result of one round.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SwarmState,
    /// Direction each agent applied, after any powerball transform.
    pub directions: Vec<Vec<f64>>,
    pub oracle_calls: u64,
}

struct AgentUpdate {
    row: Vec<f64>,
    direction: Vec<f64>,
    calls: u64,
}

#[allow(clippy::too_many_arguments)]
fn agent_update<P: StochasticProblem>(
    i: usize,
    state: &SwarmState,
    profile: &SpectralProfile,
    params: &HyperParams,
    problem: &P,
    algorithm: Algorithm,
    streams: &mut AgentStreams,
) -> Result<AgentUpdate, RunError> {
    let k = state.k;
    let x = state.row(i);
    let xi = problem.sample(i, &mut streams.data);
    let (direction, calls) = match algorithm {
        Algorithm::FirstOrder => (problem.sample_gradient(i, x, &xi), 1),
        Algorithm::Zoom | Algorithm::ZoomPb => {
            let err = |source| RunError::Estimate { k, agent: i, source };
            let s = sample_coordinates(state.p, params.n_c, &mut streams.coordinates).map_err(err)?;
            let delta = params.smoothing.radius(state.n, state.p, k);
            let mut g = params
                .estimator
                .estimate(|y: &[f64]| problem.evaluate(i, y, &xi), x, &s, delta)
                .map_err(err)?;
            powerball_in_place(&mut g, algorithm.effective_gamma(params));
            (g, params.estimator.calls_per_estimate(params.n_c))
        }
    };
    let mix = consensus_term(profile, state, i);
    let mut row = Vec::with_capacity(state.p);
    for ((xj, mj), gj) in x.iter().zip(&mix).zip(&direction) {
        let v = xj - params.alpha * mj - params.eta * gj;
        if !v.is_finite() || v.abs() > DIVERGENCE_BOUND {
            return Err(RunError::Diverged { k, agent: i, value: v });
        }
        row.push(v);
    }
    Ok(AgentUpdate { row, direction, calls })
}

fn assemble(state: &SwarmState, updates: Vec<AgentUpdate>) -> StepOutcome {
    let mut iterates = Vec::with_capacity(state.n * state.p);
    let mut directions = Vec::with_capacity(state.n);
    let mut oracle_calls = 0;
    for u in updates {
        iterates.extend_from_slice(&u.row);
        directions.push(u.direction);
        oracle_calls += u.calls;
    }
    StepOutcome {
        state: SwarmState { n: state.n, p: state.p, iterates, k: state.k + 1 },
        directions,
        oracle_calls,
    }
}

/// Computes agents in the given `order`; the result does not depend on it.
pub(crate) fn step_in_order<P: StochasticProblem>(
    state: &SwarmState,
    profile: &SpectralProfile,
    params: &HyperParams,
    problem: &P,
    algorithm: Algorithm,
    rngs: &mut SwarmRng,
    order: &[usize],
) -> Result<StepOutcome, RunError> {
    let mut slots: Vec<Option<AgentUpdate>> = (0..state.n).map(|_| None).collect();
    for &i in order {
        let u = agent_update(i, state, profile, params, problem, algorithm, rngs.agent(i))?;
        slots[i] = Some(u);
    }
    Ok(assemble(state, slots.into_iter().map(|u| u.expect("order covers every agent")).collect()))
}

/// One synchronous round. Hyperparameters are assumed validated.
pub fn step<P: StochasticProblem>(
    state: &SwarmState,
    profile: &SpectralProfile,
    params: &HyperParams,
    problem: &P,
    algorithm: Algorithm,
    rngs: &mut SwarmRng,
    exec: Execution,
) -> Result<StepOutcome, RunError> {
    match exec {
        Execution::Sequential => {
            let order: Vec<usize> = (0..state.n).collect();
            step_in_order(state, profile, params, problem, algorithm, rngs, &order)
        }
        Execution::Parallel => {
            let updates = rngs
                .agents
                .par_iter_mut()
                .enumerate()
                .map(|(i, s)| agent_update(i, state, profile, params, problem, algorithm, s))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(assemble(state, updates))
        }
    }
}

/// One ZOOM round.
pub fn zoom_step<P: StochasticProblem>(
    state: &SwarmState,
    profile: &SpectralProfile,
    params: &HyperParams,
    problem: &P,
    rngs: &mut SwarmRng,
) -> Result<SwarmState, RunError> {
    step(state, profile, params, problem, Algorithm::Zoom, rngs, Execution::Sequential).map(|o| o.state)
}

/// One ZOOM-PB round.
pub fn zoom_pb_step<P: StochasticProblem>(
    state: &SwarmState,
    profile: &SpectralProfile,
    params: &HyperParams,
    problem: &P,
    rngs: &mut SwarmRng,
) -> Result<SwarmState, RunError> {
    step(state, profile, params, problem, Algorithm::ZoomPb, rngs, Execution::Sequential).map(|o| o.state)
}

/// Runs `params.horizon` rounds from the configured initialization.
pub fn run<P: StochasticProblem>(
    topo: &Topology,
    problem: &P,
    params: &HyperParams,
    algorithm: Algorithm,
    seed: u64,
) -> Result<Trajectory, RunError> {
    run_with(topo, problem, params, algorithm, seed, Execution::Sequential)
}

pub fn run_with<P: StochasticProblem>(
    topo: &Topology,
    problem: &P,
    params: &HyperParams,
    algorithm: Algorithm,
    seed: u64,
    exec: Execution,
) -> Result<Trajectory, RunError> {
    if !graph::is_connected(topo) {
        return Err(RunError::Disconnected);
    }
    if problem.agents() != topo.n() {
        return Err(RunError::AgentMismatch { problem: problem.agents(), topology: topo.n() });
    }
    let profile = graph::laplacian_spectrum(topo)?;
    let (n, p) = (topo.n(), problem.dimension());
    params.validate(&profile, p)?;

    let gamma = algorithm.effective_gamma(params);
    let started = Instant::now();
    let elapsed_ms = || started.elapsed().as_secs_f64() * 1e3;
    let mut rngs = SwarmRng::new(seed, n);
    let mut state = initial_state(n, p, params.init, seed);
    let mut calls = 0u64;
    let mut records = vec![metrics::observe(problem, &state, gamma, calls, elapsed_ms())];
    while state.k < params.horizon {
        let out = step(&state, &profile, params, problem, algorithm, &mut rngs, exec)?;
        calls += out.oracle_calls;
        state = out.state;
        if state.k.is_multiple_of(params.record_every) || state.k == params.horizon {
            records.push(metrics::observe(problem, &state, gamma, calls, elapsed_ms()));
        }
    }
    Ok(Trajectory {
        algorithm,
        gamma,
        horizon: params.horizon,
        accuracy: problem.accuracy(&state.mean()),
        optimum: problem.optimum_value(),
        records,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_quadratic_toy, QuadraticToy};
    use proptest::prelude::*;

    fn toy_setup() -> (Topology, SpectralProfile, QuadraticToy) {
        let topo = graph::erdos_renyi(6, 0.5, 3).unwrap();
        let prof = graph::laplacian_spectrum(&topo).unwrap();
        (topo, prof, make_quadratic_toy(6, 4, 2).with_noise(0.3))
    }

    #[test]
    fn powerball_cases() {
        assert_eq!(powerball(&[4.0, -4.0, 0.0], 0.5), vec![2.0, -2.0, 0.0]);
        assert_eq!(powerball(&[1.0, -1.0], 0.7), vec![1.0, -1.0]);
        let v = [0.3, -7.25, 1e-9, 0.0, -0.0];
        assert_eq!(powerball(&v, 1.0), v.to_vec());
    }

    #[test]
    fn consensus_term_cases() {
        let p2 = graph::laplacian_spectrum(&Topology::complete(2)).unwrap();
        let s = SwarmState::from_rows(vec![vec![1.0], vec![0.0]]);
        assert_eq!(consensus_term(&p2, &s, 0), vec![1.0]);
        assert_eq!(consensus_term(&p2, &s, 1), vec![-1.0]);
        let same = SwarmState::from_rows(vec![vec![2.5, -1.0]; 2]);
        assert_eq!(consensus_term(&p2, &same, 0), vec![0.0, 0.0]);
        let lonely = graph::laplacian_spectrum(&Topology::from_edges(3, &[(0, 1)]).unwrap()).unwrap();
        let s3 = SwarmState::from_rows(vec![vec![1.0], vec![2.0], vec![5.0]]);
        assert_eq!(consensus_term(&lonely, &s3, 2), vec![0.0]);
    }

    #[test]
    fn theorem_schedule_values() {
        let s = theorem_schedule(10, 100, 10_000, 1.0);
        assert!((s.eta - 3.162_277_660_168_379e-3).abs() < 1e-15);
        assert!(s.premise_holds);
        assert_eq!(theorem_schedule(1, 1, 1, 1.0).eta, 1.0);
        assert!(!theorem_schedule(10, 2, 100, 1.0).premise_holds);
    }

    #[test]
    fn pure_consensus_contracts() {
        let topo = Topology::path(3);
        let prof = graph::laplacian_spectrum(&topo).unwrap();
        let toy = make_quadratic_toy(3, 2, 0);
        let mut params = HyperParams::theorem(&prof, 2, 100);
        params.eta = 0.0;
        let mut rngs = SwarmRng::new(0, 3);
        let mut s = SwarmState::from_rows(vec![vec![1.0, -3.0], vec![0.0, 4.0], vec![2.0, 0.5]]);
        let mut prev = metrics::consensus_error(&s);
        let start = prev;
        for _ in 0..200 {
            s = zoom_step(&s, &prof, &params, &toy, &mut rngs).unwrap();
            let e = metrics::consensus_error(&s);
            assert!(e <= prev + 1e-15);
            prev = e;
        }
        assert!(prev < 1e-3 * start);
    }

    #[test]
    fn single_agent_is_plain_coordinate_descent() {
        let topo = Topology::from_edges(1, &[]).unwrap();
        let prof = graph::laplacian_spectrum(&topo).unwrap();
        let toy = QuadraticToy::new(vec![vec![1.0, 2.0, 3.0]], 0.0);
        let params = HyperParams {
            alpha: 0.0,
            eta: 0.1,
            estimator: Estimator::Central,
            n_c: 3,
            ..HyperParams::theorem(&prof, 3, 10)
        };
        let s = SwarmState::zeros(1, 3);
        let next = zoom_step(&s, &prof, &params, &toy, &mut SwarmRng::new(1, 1)).unwrap();
        // central differences are exact: x - 0.1 * (x - c)
        for (v, c) in next.row(0).iter().zip([1.0, 2.0, 3.0]) {
            assert!((v - 0.1 * c).abs() < 1e-12);
        }
    }

    #[test]
    fn powerball_step_hand_value() {
        let topo = Topology::from_edges(1, &[]).unwrap();
        let prof = graph::laplacian_spectrum(&topo).unwrap();
        // f = ½(x + 4)² at x = 0 has gradient 4; central is exact.
        let toy = QuadraticToy::new(vec![vec![-4.0]], 0.0);
        let params = HyperParams {
            alpha: 0.0,
            eta: 1.0,
            gamma: 0.5,
            estimator: Estimator::Central,
            smoothing: SmoothingSchedule::Fixed(0.5),
            ..HyperParams::theorem(&prof, 1, 1)
        };
        let s = SwarmState::zeros(1, 1);
        let next = zoom_pb_step(&s, &prof, &params, &toy, &mut SwarmRng::new(0, 1)).unwrap();
        assert!((next.row(0)[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_one_reduces_to_zoom() {
        let (_, prof, toy) = toy_setup();
        for est in [Estimator::Forward, Estimator::Central] {
            let params = HyperParams { gamma: 1.0, estimator: est, ..HyperParams::theorem(&prof, 4, 50) };
            let s0 = initial_state(6, 4, Init::Gaussian { std: 1.0 }, 5);
            let (mut a, mut b) = (s0.clone(), s0);
            let (mut ra, mut rb) = (SwarmRng::new(5, 6), SwarmRng::new(5, 6));
            for _ in 0..30 {
                a = zoom_step(&a, &prof, &params, &toy, &mut ra).unwrap();
                b = zoom_pb_step(&b, &prof, &params, &toy, &mut rb).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn unit_directions_ignore_gamma() {
        let topo = Topology::complete(2);
        let prof = graph::laplacian_spectrum(&topo).unwrap();
        let toy = QuadraticToy::new(vec![vec![0.0, 0.0]; 2], 0.0);
        let params = HyperParams {
            n_c: 2,
            estimator: Estimator::Central,
            smoothing: SmoothingSchedule::Fixed(0.5),
            gamma: 0.55,
            ..HyperParams::theorem(&prof, 2, 1)
        };
        // central differences of ½‖x‖² at rows of ±1 give directions in {−1, 1}
        let s = SwarmState::from_rows(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let a = zoom_step(&s, &prof, &params, &toy, &mut SwarmRng::new(0, 2)).unwrap();
        let b = zoom_pb_step(&s, &prof, &params, &toy, &mut SwarmRng::new(0, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn order_and_parallelism_do_not_matter() {
        let (_, prof, toy) = toy_setup();
        let params = HyperParams { n_c: 2, ..HyperParams::theorem(&prof, 4, 20) };
        let s0 = initial_state(6, 4, Init::Gaussian { std: 0.5 }, 8);
        let seq = step(&s0, &prof, &params, &toy, Algorithm::ZoomPb, &mut SwarmRng::new(8, 6), Execution::Sequential).unwrap();
        let par = step(&s0, &prof, &params, &toy, Algorithm::ZoomPb, &mut SwarmRng::new(8, 6), Execution::Parallel).unwrap();
        let rev: Vec<usize> = (0..6).rev().collect();
        let back = step_in_order(&s0, &prof, &params, &toy, Algorithm::ZoomPb, &mut SwarmRng::new(8, 6), &rev).unwrap();
        assert_eq!(seq.state, par.state);
        assert_eq!(seq.state, back.state);
    }

    #[test]
    fn divergence_is_reported() {
        let topo = Topology::complete(2);
        let prof = graph::laplacian_spectrum(&topo).unwrap();
        let toy = QuadraticToy::new(vec![vec![0.0]; 2], 0.0);
        let params = HyperParams {
            eta: 1e13,
            estimator: Estimator::Central,
            ..HyperParams::theorem(&prof, 1, 5)
        };
        let s = SwarmState::from_rows(vec![vec![1.0], vec![1.0]]);
        let err = zoom_step(&s, &prof, &params, &toy, &mut SwarmRng::new(0, 2)).unwrap_err();
        assert!(matches!(err, RunError::Diverged { k: 0, agent: 0, .. }), "{err}");
    }

    #[test]
    fn run_rejects_disconnected_and_bad_alpha() {
        let toy = make_quadratic_toy(3, 2, 0);
        let disc = Topology::from_edges(3, &[(0, 1)]).unwrap();
        let prof = graph::laplacian_spectrum(&Topology::path(3)).unwrap();
        let params = HyperParams::theorem(&prof, 2, 5);
        assert!(matches!(run(&disc, &toy, &params, Algorithm::Zoom, 0), Err(RunError::Disconnected)));
        let too_big = HyperParams { alpha: prof.alpha_max, ..params.clone() };
        assert!(matches!(
            run(&Topology::path(3), &toy, &too_big, Algorithm::Zoom, 0),
            Err(RunError::InvalidParams(_))
        ));
        let wrong_n = make_quadratic_toy(4, 2, 0);
        assert!(matches!(
            run(&Topology::path(3), &wrong_n, &params, Algorithm::Zoom, 0),
            Err(RunError::AgentMismatch { .. })
        ));
    }

    #[test]
    fn run_zero_horizon_and_determinism() {
        let (topo, prof, toy) = toy_setup();
        let zero = HyperParams::theorem(&prof, 4, 0);
        let t = run(&topo, &toy, &zero, Algorithm::Zoom, 1).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.records[0].k, 0);

        let params = HyperParams { record_every: 7, ..HyperParams::theorem(&prof, 4, 50) };
        let a = run(&topo, &toy, &params, Algorithm::ZoomPb, 9).unwrap();
        let b = run_with(&topo, &toy, &params, Algorithm::ZoomPb, 9, Execution::Parallel).unwrap();
        assert_eq!(a.final_state, b.final_state);
        let ks: Vec<usize> = a.records.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![0, 7, 14, 21, 28, 35, 42, 49, 50]);
    }

    proptest! {
        #[test]
        fn powerball_properties(x in -1e3f64..1e3, y in -1e3f64..1e3, gamma in 0.5f64..=1.0) {
            let s = powerball(&[x, y, -x], gamma);
            prop_assert_eq!(s[0].signum() * (x != 0.0) as i32 as f64, x.signum() * (x != 0.0) as i32 as f64);
            prop_assert!((s[0].abs() - x.abs().powf(gamma)).abs() <= 1e-12 * (1.0 + x.abs()));
            prop_assert_eq!(s[2], -s[0]);
            if x <= y {
                prop_assert!(s[0] <= s[1]);
            }
        }

        #[test]
        fn mean_follows_average_direction(seed in any::<u64>(), pb in any::<bool>()) {
            let (_, prof, toy) = toy_setup();
            let params = HyperParams { n_c: 2, ..HyperParams::theorem(&prof, 4, 10) };
            let s0 = initial_state(6, 4, Init::Gaussian { std: 2.0 }, seed);
            let alg = if pb { Algorithm::ZoomPb } else { Algorithm::Zoom };
            let out = step(&s0, &prof, &params, &toy, alg, &mut SwarmRng::new(seed, 6), Execution::Sequential).unwrap();
            let before = s0.mean();
            let after = out.state.mean();
            for j in 0..4 {
                let avg: f64 = out.directions.iter().map(|d| d[j]).sum::<f64>() / 6.0;
                let want = before[j] - params.eta * avg;
                prop_assert!((after[j] - want).abs() < 1e-12, "{} vs {}", after[j], want);
            }
        }
    }
}
