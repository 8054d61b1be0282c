//! `zoom`: run decentralized zeroth-order optimization experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use zoom_core::dynamics::Execution;
use zoom_core::graph::{self, Topology};
use zoom_core::harness::{self, selfcheck, ExperimentConfig, SummaryRow};
use zoom_core::metrics::fmt_num;

#[derive(Parser)]
#[command(name = "zoom", version, about = "Decentralized zeroth-order coordinate methods (ZOOM / ZOOM-PB)")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config file, or the name of a bundled config (paper_iv_a, toy_quadratic).
    #[arg(long, global = true)]
    config: Option<String>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run a single master seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,

    /// Run (algorithm, seed) jobs one at a time.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured algorithm over every seed and write CSVs.
    Run,
    /// Sweep the powerball exponent with both estimators.
    Sweep {
        /// Comma-separated exponents (defaults to `sweep.gammas`).
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
    },
    /// Print the Laplacian spectrum of a topology.
    Spectra {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        prob: Option<f64>,
        /// Topology seed.
        #[arg(long = "topology-seed")]
        topology_seed: Option<u64>,
        /// Read the topology from an edge list instead.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Write the topology as an edge list.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Check,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let Some(src) = &cli.config else { bail!("--config is required for this subcommand") };
    let mut cfg = ExperimentConfig::load(src).with_context(|| format!("loading config `{src}`"))?;
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(&cfg.name))
}

fn execution(cli: &Cli) -> Execution {
    if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn print_rows(rows: &[SummaryRow]) {
    println!(
        "{:<24} {:>6} {:>8} {:>5} {:>12} {:>12} {:>12} {:>8}",
        "algorithm", "gamma", "est", "seeds", "final_loss", "avg_grad2", "avg_cons", "acc"
    );
    for r in rows {
        let est = r.estimator.map_or("none", |e| e.name());
        let acc = r.median_accuracy.map_or("-".to_string(), |a| format!("{:.3}", a));
        let flag = if r.gamma_in_theory_range() { "" } else { "  (gamma outside [0.5, 1])" };
        println!(
            "{:<24} {:>6} {:>8} {:>5} {:>12.6e} {:>12.6e} {:>12.6e} {:>8}{flag}",
            r.label,
            fmt_num(r.gamma),
            est,
            r.seed_count,
            r.median_final_loss,
            r.median_avg_grad_norm_sq,
            r.median_avg_consensus_err,
            acc
        );
    }
}

fn cmd_run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let dir = out_dir(cli, &cfg);
    let report = harness::run_battery(&cfg, &dir, execution(cli))?;
    if !cli.quiet {
        print_rows(&report.rows);
        println!("wrote {} files to {}", report.files.len(), dir.display());
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, gammas: Option<Vec<f64>>) -> Result<()> {
    let cfg = load_config(cli)?;
    let gammas = gammas.unwrap_or_else(|| cfg.sweep_gammas.clone());
    let (rows, _) = harness::gamma_sweep(&cfg, &gammas, execution(cli))?;
    let dir = out_dir(cli, &cfg);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("sweep_summary.csv");
    std::fs::write(&path, harness::summary_csv(&rows)).with_context(|| format!("writing {}", path.display()))?;
    if !cli.quiet {
        print_rows(&rows);
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_spectra(
    cli: &Cli,
    n: Option<usize>,
    prob: Option<f64>,
    topology_seed: Option<u64>,
    edges: Option<PathBuf>,
    export: Option<PathBuf>,
) -> Result<()> {
    let topo = if let Some(path) = edges {
        Topology::read_edge_list(&path).with_context(|| format!("reading {}", path.display()))?
    } else {
        let base = match &cli.config {
            Some(_) => Some(load_config(cli)?.topology),
            None => None,
        };
        let n = n.or(base.as_ref().map(|t| t.n)).context("need --n, --edges or --config")?;
        let prob = prob.or(base.as_ref().map(|t| t.prob)).unwrap_or(0.4);
        let seed = topology_seed.or(base.as_ref().map(|t| t.seed)).unwrap_or(0);
        graph::erdos_renyi(n, prob, seed)?
    };
    let profile = graph::laplacian_spectrum(&topo)?;
    if let Some(path) = export {
        std::fs::write(&path, topo.to_edge_list()).with_context(|| format!("writing {}", path.display()))?;
    }
    if !cli.quiet {
        println!("connected   {}", graph::is_connected(&topo));
        println!("edges       {}", topo.edges().len());
        println!("{profile}");
    }
    Ok(())
}

fn cmd_check(cli: &Cli) -> Result<()> {
    let results = selfcheck::run_all();
    let failed = results.iter().filter(|c| !c.passed).count();
    for c in &results {
        if !cli.quiet || !c.passed {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            println!("[{tag}] {} {}", c.name, c.detail);
        }
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", results.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Run => cmd_run(&cli),
        Command::Sweep { gammas } => cmd_sweep(&cli, gammas.clone()),
        Command::Spectra { n, prob, topology_seed, edges, export } => {
            cmd_spectra(&cli, *n, *prob, *topology_seed, edges.clone(), export.clone())
        }
        Command::Check => cmd_check(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
