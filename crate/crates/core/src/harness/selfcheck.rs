//! Quick invariant battery behind the `check` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{self, Algorithm, Execution, HyperParams, Init};
use crate::estimator::{central_estimate, forward_estimate, CoordinateSample, Estimator, SmoothingSchedule};
use crate::graph::{self, Topology};
use crate::harness::{execute, ExperimentConfig};
use crate::metrics;
use crate::problems::{make_quadratic_toy, make_synthetic_classification, StochasticProblem, SyntheticSpec};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn spectra() -> CheckResult {
    let p3 = graph::laplacian_spectrum(&Topology::path(3)).unwrap();
    let k2 = graph::laplacian_spectrum(&Topology::complete(2)).unwrap();
    let eig_ok = p3.eigenvalues.iter().zip([0.0, 1.0, 3.0]).all(|(a, b)| (a - b).abs() < 1e-10);
    let ok = eig_ok && (p3.alpha_max - 1.0 / 18.0).abs() < 1e-10 && (k2.alpha_max - 0.25).abs() < 1e-12;
    check("laplacian spectra (P3, K2)", ok, format!("P3 {:?}, K2 alpha_max {}", p3.eigenvalues, k2.alpha_max))
}

fn unbiased_scaling() -> CheckResult {
    let toy = make_quadratic_toy(1, 6, 4).with_noise(0.3);
    let xi = toy.sample(0, &mut ChaCha8Rng::seed_from_u64(1));
    let f = |y: &[f64]| toy.evaluate(0, y, &xi);
    let x = [0.4, -1.0, 0.2, 2.0, -0.3, 0.9];
    let full = forward_estimate(f, &x, &CoordinateSample::full(6), 0.05).unwrap();
    let mut avg = [0.0; 6];
    let mut count = 0;
    for a in 0..6 {
        for b in a + 1..6 {
            let g = forward_estimate(f, &x, &CoordinateSample::new(6, vec![a, b]).unwrap(), 0.05).unwrap();
            avg.iter_mut().zip(&g).for_each(|(s, v)| *s += v);
            count += 1;
        }
    }
    let err = avg.iter().zip(&full).map(|(s, v)| (s / count as f64 - v).abs()).fold(0.0, f64::max);
    check("forward estimator subset average", err < 1e-10, format!("max error {err:e}"))
}

fn central_exact() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let h: Vec<f64> = (0..4).map(|_| rng.random_range(0.5..3.0)).collect();
        let f = |y: &[f64]| y.iter().zip(&h).map(|(v, c)| c * v * v).sum::<f64>();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let s = CoordinateSample::new(4, vec![1, 3]).unwrap();
        let g = central_estimate(f, &x, &s, 0.1).unwrap();
        for &j in s.indices() {
            let want = s.scale() * 2.0 * h[j] * x[j];
            worst = worst.max((g[j] - want).abs() / want.abs().max(1e-300));
        }
    }
    check("central estimator exact on quadratics", worst < 1e-9, format!("max rel error {worst:e}"))
}

fn nlls_gradient() -> CheckResult {
    let spec = SyntheticSpec { n_train: 40, n_test: 4, dim: 8, n_agents: 2 };
    let data = std::sync::Arc::new(make_synthetic_classification(spec, 5));
    let prob = crate::problems::NllsProblem::new(data, Default::default());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g = prob.local_gradient(0, &x);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut y = x.clone();
    for j in 0..8 {
        y[j] = x[j] + h;
        let up = prob.local_loss(0, &y);
        y[j] = x[j] - h;
        let dn = prob.local_loss(0, &y);
        y[j] = x[j];
        let fd = (up - dn) / (2.0 * h);
        worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1e-8));
    }
    check("classification gradient vs finite differences", worst < 1e-5, format!("max rel error {worst:e}"))
}

fn reduction_and_contraction() -> Vec<CheckResult> {
    let topo = graph::erdos_renyi(5, 0.5, 2).unwrap();
    let prof = graph::laplacian_spectrum(&topo).unwrap();
    let toy = make_quadratic_toy(5, 3, 1).with_noise(0.2);
    let params = HyperParams { gamma: 1.0, init: Init::Gaussian { std: 1.0 }, ..HyperParams::theorem(&prof, 3, 100) };
    let a = dynamics::run(&topo, &toy, &params, Algorithm::Zoom, 4).unwrap();
    let b = dynamics::run(&topo, &toy, &params, Algorithm::ZoomPb, 4).unwrap();
    let same = a.final_state == b.final_state && metrics::to_csv(&a, false) == metrics::to_csv(&b, false);

    let quiet = HyperParams { eta: 0.0, ..params };
    let c = dynamics::run(&topo, &toy, &quiet, Algorithm::Zoom, 4).unwrap();
    let errs: Vec<f64> = c.records.iter().map(|r| r.consensus_err).collect();
    let monotone = errs.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    vec![
        check("ZOOM-PB at gamma = 1 equals ZOOM", same, String::new()),
        check(
            "consensus contraction with eta = 0",
            monotone && errs.last().unwrap() < &errs[0],
            format!("{:e} -> {:e}", errs[0], errs.last().unwrap()),
        ),
    ]
}

fn determinism() -> CheckResult {
    let cfg = ExperimentConfig::parse(
        "problem = quadratic\nproblem.dim = 4\nproblem.noise = 0.3\ntopology.n = 5\n\
         run.horizon = 60\nrun.seeds = 1, 2\nalgorithms = zoom, zoom_pb\n",
    )
    .unwrap();
    let seq = execute(&cfg, Execution::Sequential).unwrap();
    let par = execute(&cfg, Execution::Parallel).unwrap();
    let same = seq
        .iter()
        .zip(&par)
        .all(|(a, b)| metrics::to_csv(&a.trajectory, false) == metrics::to_csv(&b.trajectory, false));
    check("battery reproducible under parallel execution", same, String::new())
}

fn schedule() -> CheckResult {
    let s = dynamics::theorem_schedule(10, 100, 10_000, 1.0);
    let d = SmoothingSchedule::TheoremDecay { kappa_delta: 1.0 }.radius(10, 100, 0);
    let ok = (s.eta - 10f64.sqrt() / 1e3).abs() < 1e-15 && (d - 1000f64.powf(-0.25)).abs() < 1e-15;
    check("theorem step-size schedule", ok, format!("eta {:e}, delta_0 {d}", s.eta))
}

fn eval_counts() -> CheckResult {
    let calls = std::cell::Cell::new(0u64);
    let f = |y: &[f64]| {
        calls.set(calls.get() + 1);
        y.iter().sum::<f64>()
    };
    let s = CoordinateSample::new(5, vec![0, 2, 4]).unwrap();
    Estimator::Forward.estimate(f, &[0.0; 5], &s, 0.1).unwrap();
    let fwd = calls.replace(0);
    Estimator::Central.estimate(f, &[0.0; 5], &s, 0.1).unwrap();
    let ctr = calls.get();
    check("oracle evaluation counts", fwd == 4 && ctr == 6, format!("forward {fwd}, central {ctr}"))
}

pub fn run_all() -> Vec<CheckResult> {
    let mut out = vec![spectra(), unbiased_scaling(), central_exact(), nlls_gradient(), schedule(), eval_counts()];
    out.extend(reduction_and_contraction());
    out.push(determinism());
    out
}
