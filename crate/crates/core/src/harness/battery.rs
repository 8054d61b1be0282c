//! Seeded batteries of runs and their persisted outputs.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{AlgorithmSpec, AlphaRule, DeltaRule, EtaRule, ExperimentConfig, ProblemSpec};
use super::{ConfigError, HarnessError};
use crate::dynamics::{self, theorem_schedule, Algorithm, Execution, HyperParams};
use crate::estimator::{Estimator, SmoothingSchedule};
use crate::graph::{self, SpectralProfile, Topology};
use crate::metrics::{self, fmt_num, Summary, Trajectory};
use crate::problems::{
    make_quadratic_toy, make_synthetic_classification, NllsProblem, QuadraticToy, SyntheticSpec,
};

pub const SUMMARY_HEADER: &str = "algorithm,gamma,estimator,seed_count,median_final_loss,median_avg_grad_norm_sq,median_avg_consensus_err,median_accuracy";

#[derive(Debug, Clone)]
pub enum ProblemInstance {
    Classification(NllsProblem),
    Quadratic(QuadraticToy),
}

/// Topology and problem built once and shared by every run of a battery.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub topology: Topology,
    pub profile: SpectralProfile,
    pub problem: ProblemInstance,
}

impl Prepared {
    pub fn dimension(&self) -> usize {
        match &self.problem {
            ProblemInstance::Classification(p) => p.data().dim(),
            ProblemInstance::Quadratic(q) => q.centers()[0].len(),
        }
    }

    pub fn params(&self, spec: &AlgorithmSpec, cfg: &ExperimentConfig) -> HyperParams {
        let (n, p, t) = (self.topology.n(), self.dimension(), cfg.horizon);
        let eta = match spec.eta {
            EtaRule::Theorem => theorem_schedule(n, p, t, 1.0).eta,
            EtaRule::Fixed(v) => v,
        };
        let smoothing = match spec.delta {
            DeltaRule::Theorem { kappa_delta } => SmoothingSchedule::TheoremDecay { kappa_delta },
            DeltaRule::Benchmark => SmoothingSchedule::benchmark(t, p),
            DeltaRule::Fixed(v) => SmoothingSchedule::Fixed(v),
        };
        let alpha = match spec.alpha {
            AlphaRule::Fraction(f) => f * self.profile.alpha_max,
            AlphaRule::Fixed(a) => a,
        };
        HyperParams {
            alpha,
            eta,
            gamma: spec.gamma,
            horizon: t,
            n_c: spec.n_c,
            estimator: spec.estimator,
            smoothing,
            init: spec.init,
            record_every: cfg.record_every,
        }
    }

    pub fn run(
        &self,
        spec: &AlgorithmSpec,
        cfg: &ExperimentConfig,
        seed: u64,
    ) -> Result<Trajectory, HarnessError> {
        let params = self.params(spec, cfg);
        let out = match &self.problem {
            ProblemInstance::Classification(p) => dynamics::run(&self.topology, p, &params, spec.algorithm, seed),
            ProblemInstance::Quadratic(q) => dynamics::run(&self.topology, q, &params, spec.algorithm, seed),
        };
        out.map_err(|source| HarnessError::Run { label: spec.label.clone(), seed, source })
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    let t = &cfg.topology;
    let topology = graph::erdos_renyi(t.n, t.prob, t.seed)?;
    let profile = graph::laplacian_spectrum(&topology)?;
    let problem = match cfg.problem {
        ProblemSpec::Classification { n_train, n_test, dim, seed, shards } => {
            let spec = SyntheticSpec { n_train, n_test, dim, n_agents: t.n };
            let data = Arc::new(make_synthetic_classification(spec, seed));
            ProblemInstance::Classification(NllsProblem::new(data, shards))
        }
        ProblemSpec::Quadratic { dim, seed, noise } => {
            ProblemInstance::Quadratic(make_quadratic_toy(t.n, dim, seed).with_noise(noise))
        }
    };
    if cfg.horizon > 0 && cfg.algorithms.iter().any(|a| a.theorem_faithful()) {
        // logs a warning when the horizon is too short for the rate guarantees
        theorem_schedule(t.n, cfg.problem.dimension(), cfg.horizon, 1.0);
    }
    Ok(Prepared { topology, profile, problem })
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub spec: AlgorithmSpec,
    pub seed: u64,
    pub trajectory: Trajectory,
    pub summary: Summary,
}

impl RunResult {
    pub fn file_name(&self) -> String {
        format!("{}_seed{}.csv", self.spec.label, self.seed)
    }
}

fn execute_specs(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    specs: &[AlgorithmSpec],
    exec: Execution,
) -> Result<Vec<RunResult>, HarnessError> {
    let jobs: Vec<(&AlgorithmSpec, u64)> =
        specs.iter().flat_map(|s| cfg.seeds.iter().map(move |&seed| (s, seed))).collect();
    let one = |&(spec, seed): &(&AlgorithmSpec, u64)| -> Result<RunResult, HarnessError> {
        let trajectory = prepared.run(spec, cfg, seed)?;
        let summary = metrics::summarize(&trajectory).expect("runs always record the initial state");
        log::info!("{} seed {seed}: final loss {}", spec.label, fmt_num(summary.final_loss));
        Ok(RunResult { spec: spec.clone(), seed, trajectory, summary })
    };
    match exec {
        Execution::Sequential => jobs.iter().map(one).collect(),
        Execution::Parallel => jobs.par_iter().map(one).collect(),
    }
}

/// Every (algorithm, seed) run of `cfg`, in config order.
pub fn execute(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<RunResult>, HarnessError> {
    let prepared = prepare(cfg)?;
    execute_specs(cfg, &prepared, &cfg.algorithms, exec)
}

/// Median; the mean of the two central values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub algorithm: Algorithm,
    /// Effective exponent (1 for ZOOM and the baseline).
    pub gamma: f64,
    pub estimator: Option<Estimator>,
    pub theorem_faithful: bool,
    pub seed_count: usize,
    pub median_final_loss: f64,
    pub median_avg_grad_norm_sq: f64,
    pub median_avg_consensus_err: f64,
    pub median_accuracy: Option<f64>,
}

impl SummaryRow {
    /// Whether γ lies in the range covered by the convergence theory.
    pub fn gamma_in_theory_range(&self) -> bool {
        (0.5..=1.0).contains(&self.gamma)
    }
}

/// One row per label, medians over seeds.
pub fn summary_rows(results: &[RunResult]) -> Vec<SummaryRow> {
    let mut labels: Vec<&str> = Vec::new();
    for r in results {
        if !labels.contains(&r.spec.label.as_str()) {
            labels.push(&r.spec.label);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let group: Vec<&RunResult> = results.iter().filter(|r| r.spec.label == label).collect();
            let spec = &group[0].spec;
            let col = |f: fn(&Summary) -> f64| median(&group.iter().map(|r| f(&r.summary)).collect::<Vec<_>>());
            let acc: Vec<f64> = group.iter().filter_map(|r| r.summary.final_accuracy).collect();
            SummaryRow {
                label: label.to_string(),
                algorithm: spec.algorithm,
                gamma: group[0].trajectory.gamma,
                estimator: (spec.algorithm != Algorithm::FirstOrder).then_some(spec.estimator),
                theorem_faithful: spec.theorem_faithful(),
                seed_count: group.len(),
                median_final_loss: col(|s| s.final_loss),
                median_avg_grad_norm_sq: col(|s| s.avg_grad_norm_sq),
                median_avg_consensus_err: col(|s| s.avg_consensus_err),
                median_accuracy: (acc.len() == group.len()).then(|| median(&acc)),
            }
        })
        .collect()
}

/// `summary.csv` contents. Leading `#` lines note what the loss column means
/// and whether each algorithm used theorem or experiment step sizes.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("# training loss = full-batch loss f at the mean iterate\n");
    for r in rows {
        let mode = if r.theorem_faithful { "theorem-faithful" } else { "experiment-faithful" };
        let _ = writeln!(s, "# {}: {mode}", r.label);
    }
    s.push_str(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.label,
            fmt_num(r.gamma),
            r.estimator.map_or("none", Estimator::name),
            r.seed_count,
            fmt_num(r.median_final_loss),
            fmt_num(r.median_avg_grad_norm_sq),
            fmt_num(r.median_avg_consensus_err),
            r.median_accuracy.map(fmt_num).unwrap_or_default(),
        );
    }
    s
}

fn write_atomic(dir: &Path, name: &str, body: &str) -> Result<PathBuf, HarnessError> {
    let path = dir.join(name);
    let io = |source| HarnessError::Io { path: path.display().to_string(), source };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(body.as_bytes()).map_err(io)?;
    tmp.persist(&path).map_err(|e| io(e.error))?;
    Ok(path)
}

#[derive(Debug)]
pub struct BatteryReport {
    pub results: Vec<RunResult>,
    pub rows: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

/// Runs the battery and writes one CSV per (algorithm, seed) plus
/// `summary.csv` into `out_dir`.
pub fn run_battery(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    exec: Execution,
) -> Result<BatteryReport, HarnessError> {
    let results = execute(cfg, exec)?;
    fs::create_dir_all(out_dir)
        .map_err(|source| HarnessError::Io { path: out_dir.display().to_string(), source })?;
    let mut files = Vec::new();
    for r in &results {
        files.push(write_atomic(out_dir, &r.file_name(), &metrics::to_csv(&r.trajectory, cfg.wall_time))?);
    }
    let rows = summary_rows(&results);
    files.push(write_atomic(out_dir, "summary.csv", &summary_csv(&rows))?);
    Ok(BatteryReport { results, rows, files })
}

/// First-order reference: the ZOOM loop with `∇F_i(x, ξ)` in place of the
/// estimate, using the first configured algorithm's step sizes.
pub fn run_baseline_dsgd(cfg: &ExperimentConfig, seed: u64) -> Result<Trajectory, HarnessError> {
    let prepared = prepare(cfg)?;
    let base = cfg.algorithms.first().ok_or(ConfigError::NoAlgorithms)?;
    let spec = AlgorithmSpec { label: "dsgd".into(), algorithm: Algorithm::FirstOrder, ..base.clone() };
    prepared.run(&spec, cfg, seed)
}

/// ZOOM-PB at each γ with both estimators, over the configured seeds.
/// Step sizes come from the first configured algorithm.
pub fn gamma_sweep(
    cfg: &ExperimentConfig,
    gammas: &[f64],
    exec: Execution,
) -> Result<(Vec<SummaryRow>, Vec<RunResult>), HarnessError> {
    if gammas.is_empty() {
        return Err(ConfigError::NoGammas.into());
    }
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
        return Err(ConfigError::BadValue { key: "sweep.gammas".into(), msg: format!("{g} outside (0, 1]") }.into());
    }
    let base = cfg.algorithms.first().ok_or(ConfigError::NoAlgorithms)?;
    let mut specs = Vec::new();
    for est in [Estimator::Forward, Estimator::Central] {
        for &gamma in gammas {
            if !(0.5..=1.0).contains(&gamma) {
                log::warn!("gamma {gamma} lies outside [0.5, 1], beyond the convergence theory");
            }
            specs.push(AlgorithmSpec {
                label: format!("zoom_pb_{}_g{}", est.name(), fmt_num(gamma)),
                algorithm: Algorithm::ZoomPb,
                estimator: est,
                gamma,
                ..base.clone()
            });
        }
    }
    let prepared = prepare(cfg)?;
    let results = execute_specs(cfg, &prepared, &specs, exec)?;
    Ok((summary_rows(&results), results))
}
