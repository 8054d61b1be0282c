//! Flat `key = value` experiment files.
//!
//! ```text
//! # comments start with '#'
//! name = paper_iv_a
//! problem = classification
//! problem.dim = 100
//! topology.n = 10
//! run.horizon = 10000
//! algorithms = zoom_fwd, zoom_pb_fwd
//! algorithm.zoom_fwd.kind = zoom
//! algorithm.zoom_pb_fwd.kind = zoom_pb
//! algorithm.zoom_pb_fwd.gamma = 0.7
//! ```
//!
//! `run.*` keys set defaults that `algorithm.<label>.*` keys override.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::dynamics::{Algorithm, Init, DEFAULT_ALPHA_FRACTION, DEFAULT_GAMMA};
use crate::estimator::Estimator;
use crate::problems::ShardMode;

/// Configs shipped with the crate, addressable by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("paper_iv_a", include_str!("../../configs/paper_iv_a.conf")),
    ("toy_quadratic", include_str!("../../configs/toy_quadratic.conf")),
];

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("no algorithms configured")]
    NoAlgorithms,
    #[error("no seeds configured")]
    NoSeeds,
    #[error("no gamma values given")]
    NoGammas,
    #[error("`algorithm.{0}.*` refers to a label missing from `algorithms`")]
    UnresolvedLabel(String),
    #[error("cannot read {path}: {msg}")]
    Read { path: String, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Classification { n_train: usize, n_test: usize, dim: usize, seed: u64, shards: ShardMode },
    Quadratic { dim: usize, seed: u64, noise: f64 },
}

impl ProblemSpec {
    pub fn dimension(&self) -> usize {
        match *self {
            Self::Classification { dim, .. } | Self::Quadratic { dim, .. } => dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologySpec {
    pub n: usize,
    pub prob: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRule {
    /// `√n / √(pT)`.
    Theorem,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    /// Decaying radius with constant κ_δ.
    Theorem { kappa_delta: f64 },
    /// `10 / √(T d)`.
    Benchmark,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    /// Multiple of `alpha_max`, in (0, 1).
    Fraction(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec {
    pub label: String,
    pub algorithm: Algorithm,
    pub estimator: Estimator,
    pub gamma: f64,
    pub eta: EtaRule,
    pub delta: DeltaRule,
    pub alpha: AlphaRule,
    pub n_c: usize,
    pub init: Init,
}

impl AlgorithmSpec {
    /// Both η and δ follow the convergence theorem.
    pub fn theorem_faithful(&self) -> bool {
        matches!(self.eta, EtaRule::Theorem) && matches!(self.delta, DeltaRule::Theorem { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemSpec,
    pub topology: TopologySpec,
    pub horizon: usize,
    pub algorithms: Vec<AlgorithmSpec>,
    pub seeds: Vec<u64>,
    pub record_every: usize,
    pub out_dir: Option<PathBuf>,
    /// Write measured wall time into the CSVs (breaks byte reproducibility).
    pub wall_time: bool,
    pub sweep_gammas: Vec<f64>,
}

struct Entries {
    map: BTreeMap<String, String>,
    used: std::collections::BTreeSet<String>,
}

impl Entries {
    fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| ConfigError::BadValue {
                key: key.to_string(),
                msg: e.to_string(),
            }),
        }
    }

    fn or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn with<T>(
        &mut self,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => parse(&v)
                .map(Some)
                .map_err(|msg| ConfigError::BadValue { key: key.to_string(), msg }),
        }
    }
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

fn parse_eta(s: &str) -> Result<EtaRule, String> {
    match s {
        "theorem" => Ok(EtaRule::Theorem),
        v => v.parse().map(EtaRule::Fixed).map_err(|e| format!("{e}")),
    }
}

fn parse_delta(s: &str, kappa_delta: f64) -> Result<DeltaRule, String> {
    match s {
        "theorem" => Ok(DeltaRule::Theorem { kappa_delta }),
        "benchmark" => Ok(DeltaRule::Benchmark),
        v => v.parse().map(DeltaRule::Fixed).map_err(|e| format!("{e}")),
    }
}

fn parse_init(s: &str) -> Result<Init, String> {
    match s.split_once(':') {
        None if s == "zero" => Ok(Init::Zero),
        Some(("gaussian", std)) => std.parse().map(|std| Init::Gaussian { std }).map_err(|e| format!("{e}")),
        _ => Err(format!("expected `zero` or `gaussian:<std>`, got `{s}`")),
    }
}

fn parse_shards(s: &str) -> Result<ShardMode, String> {
    match s {
        "partitioned" => Ok(ShardMode::Partitioned),
        "shared" => Ok(ShardMode::Shared),
        _ => Err(format!("expected partitioned|shared, got `{s}`")),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: idx + 1 })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: idx + 1 });
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: idx + 1, key: k.to_string() });
            }
        }
        let mut e = Entries { map, used: Default::default() };
        let cfg = Self::from_entries(&mut e)?;
        if let Some(k) = e.map.keys().find(|k| !e.used.contains(*k)) {
            let label = k.strip_prefix("algorithm.").and_then(|r| r.split('.').next());
            return Err(match label {
                Some(l) if !cfg.algorithms.iter().any(|a| a.label == l) => {
                    ConfigError::UnresolvedLabel(l.to_string())
                }
                _ => ConfigError::UnknownKey(k.clone()),
            });
        }
        Ok(cfg)
    }

    fn from_entries(e: &mut Entries) -> Result<Self, ConfigError> {
        let name = e.or("name", "experiment".to_string())?;
        let topology = TopologySpec {
            n: e.get("topology.n")?.ok_or_else(|| ConfigError::Missing("topology.n".into()))?,
            prob: e.or("topology.prob", 0.4)?,
            seed: e.or("topology.seed", 0)?,
        };
        let kind = e.raw("problem").ok_or_else(|| ConfigError::Missing("problem".into()))?;
        let problem = match kind.as_str() {
            "classification" => ProblemSpec::Classification {
                n_train: e.or("problem.n_train", 2000)?,
                n_test: e.or("problem.n_test", 200)?,
                dim: e.or("problem.dim", 100)?,
                seed: e.or("problem.seed", 0)?,
                shards: e.with("problem.shards", parse_shards)?.unwrap_or_default(),
            },
            "quadratic" => ProblemSpec::Quadratic {
                dim: e.or("problem.dim", 10)?,
                seed: e.or("problem.seed", 0)?,
                noise: e.or("problem.noise", 0.0)?,
            },
            other => {
                return Err(ConfigError::BadValue {
                    key: "problem".into(),
                    msg: format!("unknown problem `{other}` (expected classification|quadratic)"),
                })
            }
        };
        if problem.dimension() == 0 {
            return Err(ConfigError::BadValue { key: "problem.dim".into(), msg: "must be positive".into() });
        }
        if let ProblemSpec::Classification { n_train, .. } = problem {
            if n_train < topology.n {
                return Err(ConfigError::BadValue {
                    key: "problem.n_train".into(),
                    msg: format!("need at least one sample per agent ({})", topology.n),
                });
            }
        }

        let horizon = e.get("run.horizon")?.ok_or_else(|| ConfigError::Missing("run.horizon".into()))?;
        let seeds: Vec<u64> = e.with("run.seeds", parse_list)?.unwrap_or_else(|| (1..=5).collect());
        if seeds.is_empty() {
            return Err(ConfigError::NoSeeds);
        }
        let record_every: usize = e.or("run.record_every", 10)?;
        if record_every == 0 {
            return Err(ConfigError::BadValue { key: "run.record_every".into(), msg: "must be positive".into() });
        }

        let kappa = e.or("run.kappa_delta", 1.0)?;
        let defaults = AlgorithmSpec {
            label: String::new(),
            algorithm: Algorithm::Zoom,
            estimator: e.or("run.estimator", Estimator::Forward)?,
            gamma: e.or("run.gamma", DEFAULT_GAMMA)?,
            eta: e.with("run.eta", parse_eta)?.unwrap_or(EtaRule::Theorem),
            delta: e
                .with("run.delta", |s| parse_delta(s, kappa))?
                .unwrap_or(DeltaRule::Theorem { kappa_delta: kappa }),
            alpha: match e.get::<f64>("run.alpha")? {
                Some(a) => AlphaRule::Fixed(a),
                None => AlphaRule::Fraction(e.or("run.alpha_fraction", DEFAULT_ALPHA_FRACTION)?),
            },
            n_c: e.or("run.n_c", 1)?,
            init: e.with("run.init", parse_init)?.unwrap_or(Init::Zero),
        };

        let labels: Vec<String> = e.with("algorithms", parse_list)?.unwrap_or_default();
        if labels.is_empty() {
            return Err(ConfigError::NoAlgorithms);
        }
        let mut algorithms = Vec::new();
        for label in labels {
            let key = |f: &str| format!("algorithm.{label}.{f}");
            let algorithm = match e.get::<Algorithm>(&key("kind"))? {
                Some(a) => a,
                None => label.parse().map_err(|msg| ConfigError::BadValue { key: key("kind"), msg })?,
            };
            let kappa_here = e.or(&key("kappa_delta"), kappa)?;
            let spec = AlgorithmSpec {
                algorithm,
                estimator: e.or(&key("estimator"), defaults.estimator)?,
                gamma: e.or(&key("gamma"), defaults.gamma)?,
                eta: e.with(&key("eta"), parse_eta)?.unwrap_or(defaults.eta),
                delta: match e.with(&key("delta"), |s| parse_delta(s, kappa_here))? {
                    Some(d) => d,
                    None => match defaults.delta {
                        DeltaRule::Theorem { .. } => DeltaRule::Theorem { kappa_delta: kappa_here },
                        d => d,
                    },
                },
                alpha: match e.get::<f64>(&key("alpha"))? {
                    Some(a) => AlphaRule::Fixed(a),
                    None => e.get(&key("alpha_fraction"))?.map_or(defaults.alpha, AlphaRule::Fraction),
                },
                n_c: e.or(&key("n_c"), defaults.n_c)?,
                init: e.with(&key("init"), parse_init)?.unwrap_or(defaults.init),
                label,
            };
            if algorithms.iter().any(|a: &AlgorithmSpec| a.label == spec.label) {
                return Err(ConfigError::BadValue {
                    key: "algorithms".into(),
                    msg: format!("duplicate label `{}`", spec.label),
                });
            }
            algorithms.push(spec);
        }

        Ok(Self {
            name,
            problem,
            topology,
            horizon,
            algorithms,
            seeds,
            record_every,
            out_dir: e.get::<String>("output.dir")?.map(PathBuf::from),
            wall_time: e.or("output.wall_time", false)?,
            sweep_gammas: e.with("sweep.gammas", parse_list)?.unwrap_or_default(),
        })
    }

    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::parse(text).expect("bundled configs parse"))
    }

    /// Reads a config file, or a bundled config when `source` names one and
    /// no such file exists.
    pub fn load(source: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = source.as_ref();
        match fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(err) => path
                .to_str()
                .and_then(Self::bundled)
                .ok_or_else(|| ConfigError::Read { path: path.display().to_string(), msg: err.to_string() }),
        }
    }
}
