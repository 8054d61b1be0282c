//! Acceptance battery: one `[PASS]` / `[FAIL]` line per criterion, nonzero exit
//! if any fails. Run with `cargo test -p zoom-core --test acceptance`.

use std::fs;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zoom_core::dynamics::{Algorithm, Execution};
use zoom_core::estimator::{central_estimate, forward_estimate, CoordinateSample};
use zoom_core::graph::{laplacian_spectrum, Topology};
use zoom_core::harness::{
    execute, gamma_sweep, median, prepare, run_battery, AlgorithmSpec, ExperimentConfig, RunResult,
};
use zoom_core::metrics::to_csv;
use zoom_core::problems::{
    make_quadratic_toy, make_synthetic_classification, NllsProblem, ShardMode, SyntheticSpec,
};
use zoom_core::StochasticProblem;

fn report(id: &str, what: &str, passed: bool, detail: String) -> bool {
    println!("[{}] {id} {what}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

fn benchmark() -> ExperimentConfig {
    ExperimentConfig::bundled("paper_iv_a").unwrap()
}

fn toy() -> ExperimentConfig {
    ExperimentConfig::bundled("toy_quadratic").unwrap()
}

fn benchmark_results() -> &'static [RunResult] {
    static CELL: OnceLock<Vec<RunResult>> = OnceLock::new();
    CELL.get_or_init(|| execute(&benchmark(), Execution::Parallel).unwrap())
}

fn by_label<'a>(results: &'a [RunResult], label: &str) -> Vec<&'a RunResult> {
    results.iter().filter(|r| r.spec.label == label).collect()
}

fn c01_benchmark_accuracy() -> bool {
    let results = benchmark_results();
    let mut detail = Vec::new();
    let mut ok = true;
    for label in ["zoom_fwd", "zoom_ctr", "zoom_pb_fwd", "zoom_pb_ctr"] {
        let acc: Vec<f64> = by_label(results, label).iter().map(|r| r.trajectory.accuracy.unwrap()).collect();
        assert_eq!(acc.len(), 5);
        let m = median(&acc);
        ok &= m >= 0.90;
        detail.push(format!("{label}={m:.3}"));
    }
    report("C1", "benchmark test accuracy >= 0.90", ok, detail.join(" "))
}

fn c02_powerball_reaches_zoom_loss_sooner() -> bool {
    let results = benchmark_results();
    let horizon = benchmark().horizon;
    let mut detail = Vec::new();
    let mut ok = true;
    for (zoom, pb) in [("zoom_fwd", "zoom_pb_fwd"), ("zoom_ctr", "zoom_pb_ctr")] {
        let target = median(&by_label(results, zoom).iter().map(|r| r.trajectory.final_loss()).collect::<Vec<_>>());
        // never reaching counts as one past the horizon
        let hits: Vec<f64> = by_label(results, pb)
            .iter()
            .map(|r| r.trajectory.first_reaching(target).map_or(horizon as f64 + 1.0, |k| k as f64))
            .collect();
        let m = median(&hits);
        ok &= m < horizon as f64;
        detail.push(format!("{pb}: k={m} (target {target:.5})"));
    }
    report("C2", "ZOOM-PB(0.7) reaches ZOOM's final loss before T", ok, detail.join("; "))
}

fn reduction_holds(cfg: &ExperimentConfig) -> Result<(), String> {
    let prepared = prepare(cfg).unwrap();
    let base = cfg.algorithms[0].clone();
    for est in [zoom_core::Estimator::Forward, zoom_core::Estimator::Central] {
        let zoom = AlgorithmSpec { algorithm: Algorithm::Zoom, estimator: est, gamma: 0.7, ..base.clone() };
        let pb = AlgorithmSpec { algorithm: Algorithm::ZoomPb, estimator: est, gamma: 1.0, ..base.clone() };
        for seed in [1, 2] {
            let a = prepared.run(&zoom, cfg, seed).unwrap();
            let b = prepared.run(&pb, cfg, seed).unwrap();
            let bits = |t: &zoom_core::Trajectory| t.final_state.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            if bits(&a) != bits(&b) || to_csv(&a, false) != to_csv(&b, false) {
                return Err(format!("{} {} seed {seed} differs", cfg.name, est.name()));
            }
        }
    }
    Ok(())
}

fn c03_gamma_one_reduces_to_zoom() -> bool {
    let outcome = reduction_holds(&toy()).and_then(|_| reduction_holds(&benchmark()));
    let detail = match &outcome {
        Ok(()) => "iterates and CSVs bit-identical on toy and benchmark, both estimators".to_string(),
        Err(e) => e.clone(),
    };
    report("C3", "ZOOM-PB at gamma=1 equals ZOOM", outcome.is_ok(), detail)
}

/// Median time-averaged (consensus error, ‖∇f(x̄)‖²) of ZOOM on the toy at horizon `t`.
fn toy_averages(t: usize) -> (f64, f64) {
    let mut cfg = toy();
    cfg.horizon = t;
    cfg.algorithms.retain(|a| a.algorithm == Algorithm::Zoom);
    let results = execute(&cfg, Execution::Parallel).unwrap();
    let cons: Vec<f64> = results.iter().map(|r| r.summary.avg_consensus_err).collect();
    let grad: Vec<f64> = results.iter().map(|r| r.summary.avg_grad_norm_sq).collect();
    (median(&cons), median(&grad))
}

fn toy_pair() -> &'static ((f64, f64), (f64, f64)) {
    static CELL: OnceLock<((f64, f64), (f64, f64))> = OnceLock::new();
    CELL.get_or_init(|| (toy_averages(1000), toy_averages(4000)))
}

fn c04_consensus_error_decays_with_horizon() -> bool {
    let ((c1, _), (c4, _)) = *toy_pair();
    let ratio = c1 / c4;
    report(
        "C4",
        "toy consensus error ratio T=1000/T=4000 in [2, 8]",
        (2.0..=8.0).contains(&ratio),
        format!("{c1:.4e} / {c4:.4e} = {ratio:.3}"),
    )
}

fn c05_gradient_norm_decays_with_horizon() -> bool {
    let ((_, g1), (_, g4)) = *toy_pair();
    let ratio = g1 / g4;
    report(
        "C5",
        "toy gradient norm ratio T=1000/T=4000 in [1.3, 6]",
        (1.3..=6.0).contains(&ratio),
        format!("{g1:.4e} / {g4:.4e} = {ratio:.3}"),
    )
}

fn subsets(p: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if p < k {
        return vec![];
    }
    let mut out = subsets(p - 1, k);
    for mut s in subsets(p - 1, k - 1) {
        s.push(p - 1);
        out.push(s);
    }
    out
}

fn c06_subset_average_is_full_forward_difference() -> bool {
    let (p, n_c, delta) = (6, 2, 0.05);
    let problem = make_quadratic_toy(3, p, 11).with_noise(0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let xi = problem.sample(1, &mut rng);
    let f = |y: &[f64]| problem.evaluate(1, y, &xi);

    let all = subsets(p, n_c);
    assert_eq!(all.len(), 15);
    let mut avg = vec![0.0; p];
    for s in &all {
        let g = forward_estimate(f, &x, &CoordinateSample::new(p, s.clone()).unwrap(), delta).unwrap();
        avg.iter_mut().zip(&g).for_each(|(a, v)| *a += v / all.len() as f64);
    }
    let base = f(&x);
    let mut worst: f64 = 0.0;
    for j in 0..p {
        let mut y = x.clone();
        y[j] += delta;
        let full = (f(&y) - base) / delta;
        worst = worst.max((avg[j] - full).abs());
    }
    report("C6", "subset average equals full forward difference", worst <= 1e-10, format!("max abs err {worst:.2e}"))
}

fn c07_central_exact_on_quadratics() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = rng.random_range(2..12);
        let n_c = rng.random_range(1..=p);
        let m: Vec<f64> = (0..p * p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..p * p).map(|ij| 0.5 * (m[ij] + m[(ij % p) * p + ij / p])).collect();
        let b: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = rng.random_range(-1.0..1.0);
        let quad = |x: &[f64]| {
            let mut v = c;
            for i in 0..p {
                v += b[i] * x[i];
                for j in 0..p {
                    v += 0.5 * a[i * p + j] * x[i] * x[j];
                }
            }
            v
        };
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let grad: Vec<f64> = (0..p).map(|i| b[i] + (0..p).map(|j| a[i * p + j] * x[j]).sum::<f64>()).collect();
        let sample = zoom_core::estimator::sample_coordinates(p, n_c, &mut rng).unwrap();
        let delta = rng.random_range(0.01..1.0);
        let g = central_estimate(quad, &x, &sample, delta).unwrap();
        let scale = p as f64 / n_c as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..p {
            let want = if sample.indices().contains(&j) { scale * grad[j] } else { 0.0 };
            num += (g[j] - want).powi(2);
            den += want.powi(2);
        }
        worst = worst.max((num / den.max(f64::MIN_POSITIVE)).sqrt());
    }
    report("C7", "central estimate exact on quadratics", worst <= 1e-9, format!("max rel err {worst:.2e} over 100 trials"))
}

fn c08_reference_spectra() -> bool {
    let p3 = laplacian_spectrum(&Topology::path(3)).unwrap();
    let want = [0.0, 1.0, 3.0];
    let eig_err = p3.eigenvalues.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let a3 = (p3.alpha_max - 1.0 / 18.0).abs();
    let k2 = laplacian_spectrum(&Topology::complete(2)).unwrap();
    let a2 = (k2.alpha_max - 0.25).abs();
    report(
        "C8",
        "P3 and K2 spectra",
        eig_err <= 1e-10 && a3 <= 1e-10 && a2 <= 1e-12,
        format!("P3 eig err {eig_err:.1e}, alpha_max err {a3:.1e}; K2 alpha_max err {a2:.1e}"),
    )
}

fn c09_nlls_gradient_matches_finite_differences() -> bool {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 1..=5u64 {
        let spec = SyntheticSpec { n_train: 200, n_test: 20, dim: 20, n_agents: 4 };
        let problem = NllsProblem::new(Arc::new(make_synthetic_classification(spec, seed)), ShardMode::Partitioned);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for _ in 0..5 {
            let x: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-0.5..0.5)).collect();
            let g = problem.global_gradient(&x);
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..spec.dim {
                let (mut up, mut down) = (x.clone(), x.clone());
                up[j] += h;
                down[j] -= h;
                let fd = (problem.loss(&up) - problem.loss(&down)) / (2.0 * h);
                num += (fd - g[j]).powi(2);
                den += g[j].powi(2);
            }
            worst = worst.max((num / den).sqrt());
        }
    }
    report("C9", "NLLS gradient vs central differences", worst <= 1e-5, format!("max rel err {worst:.2e}"))
}

fn c10_gamma_sweep_is_stable() -> bool {
    let cfg = benchmark();
    let (_, results) = gamma_sweep(&cfg, &[0.5, 0.7, 0.9, 1.0], Execution::Parallel).unwrap();
    let mut bad = Vec::new();
    for r in &results {
        let t = &r.trajectory;
        let finite = t.final_state.as_slice().iter().all(|v| v.is_finite())
            && t.records.iter().all(|rec| rec.mean_train_loss.is_finite());
        if !finite || t.final_loss() >= t.initial_loss() {
            bad.push(format!("{} seed {}", r.spec.label, r.seed));
        }
    }
    report(
        "C10",
        "gamma sweep finite and descending",
        results.len() == 40 && bad.is_empty(),
        if bad.is_empty() { format!("{} runs ok", results.len()) } else { bad.join(", ") },
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn c11_batteries_are_byte_reproducible() -> bool {
    let mut short = benchmark();
    short.horizon = 300;
    let mut detail = Vec::new();
    let mut ok = true;
    for cfg in [toy(), short] {
        let runs: Vec<_> = [Execution::Sequential, Execution::Parallel, Execution::Parallel]
            .into_iter()
            .map(|exec| {
                let dir = tempfile::tempdir().unwrap();
                run_battery(&cfg, dir.path(), exec).unwrap();
                dir_bytes(dir.path())
            })
            .collect();
        let same = runs.windows(2).all(|w| w[0] == w[1]);
        ok &= same && !runs[0].is_empty();
        detail.push(format!("{}: {} files {}", cfg.name, runs[0].len(), if same { "identical" } else { "differ" }));
    }
    report("C11", "battery reruns byte-identical (sequential and parallel)", ok, detail.join("; "))
}

fn main() {
    let criteria: [fn() -> bool; 11] = [
        c01_benchmark_accuracy,
        c02_powerball_reaches_zoom_loss_sooner,
        c03_gamma_one_reduces_to_zoom,
        c04_consensus_error_decays_with_horizon,
        c05_gradient_norm_decays_with_horizon,
        c06_subset_average_is_full_forward_difference,
        c07_central_exact_on_quadratics,
        c08_reference_spectra,
        c09_nlls_gradient_matches_finite_differences,
        c10_gamma_sweep_is_stable,
        c11_batteries_are_byte_reproducible,
    ];
    let failed = criteria.iter().filter(|c| !c()).count();
    println!("acceptance: {} of {} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
