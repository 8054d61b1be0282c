//! Black-box binary classification posed as non-linear least squares.
//!
//! Each sample contributes `(y − φ(x; a))²` with `φ(x; a) = 1 / (1 + e^{−aᵀx})`.
//! Features are standard normal and labels come from the planted vector
//! `x_opt = 𝟙`: `y = 1` iff `φ(𝟙; a) ≥ 1/2`, i.e. iff `Σ_j a_j ≥ 0`.

use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use super::{dot, StochasticProblem};
use crate::rng;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot split {samples} samples over {agents} agents")]
    BadShards { samples: usize, agents: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    /// 0 or 1.
    pub label: u8,
}

impl Example {
    fn target(&self) -> f64 {
        f64::from(self.label)
    }
}

/// Overflow-safe logistic function.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Sizes for [`make_synthetic_classification`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    pub n_agents: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { n_train: 2000, n_test: 200, dim: 100, n_agents: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct ClassificationDataset {
    dim: usize,
    train: Vec<Example>,
    test: Vec<Example>,
    shards: Vec<Range<usize>>,
}

impl ClassificationDataset {
    /// Splits `train` into `n_agents` contiguous shards of `len / n_agents`
    /// samples, with the remainder going to the last agent.
    pub fn from_parts(
        train: Vec<Example>,
        test: Vec<Example>,
        n_agents: usize,
    ) -> Result<Self, DatasetError> {
        if n_agents == 0 || train.len() < n_agents {
            return Err(DatasetError::BadShards { samples: train.len(), agents: n_agents });
        }
        let dim = train[0].features.len();
        let per = train.len() / n_agents;
        let shards = (0..n_agents)
            .map(|i| {
                let end = if i + 1 == n_agents { train.len() } else { (i + 1) * per };
                i * per..end
            })
            .collect();
        Ok(Self { dim, train, test, shards })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn train(&self) -> &[Example] {
        &self.train
    }

    pub fn test(&self) -> &[Example] {
        &self.test
    }

    pub fn shards(&self) -> &[Range<usize>] {
        &self.shards
    }

    pub fn agents(&self) -> usize {
        self.shards.len()
    }
}

fn draw_example<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Example {
    let features: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let label = u8::from(dot(&features, &vec![1.0; dim]) >= 0.0);
    Example { features, label }
}

pub fn make_synthetic_classification(spec: SyntheticSpec, seed: u64) -> ClassificationDataset {
    let mut rng = rng::aux_stream(seed, 1);
    let train = (0..spec.n_train).map(|_| draw_example(spec.dim, &mut rng)).collect();
    let test = (0..spec.n_test).map(|_| draw_example(spec.dim, &mut rng)).collect();
    ClassificationDataset::from_parts(train, test, spec.n_agents)
        .expect("synthetic spec must have at least one sample per agent")
}

fn sample_loss(ex: &Example, x: &[f64]) -> f64 {
    let r = ex.target() - sigmoid(dot(&ex.features, x));
    r * r
}

fn accumulate_sample_gradient(ex: &Example, x: &[f64], out: &mut [f64], weight: f64) {
    let phi = sigmoid(dot(&ex.features, x));
    let c = -2.0 * (ex.target() - phi) * phi * (1.0 - phi) * weight;
    for (o, a) in out.iter_mut().zip(&ex.features) {
        *o += c * a;
    }
}

/// Loss of training sample `xi` at `x`. `agent` is accepted for symmetry with
/// the oracle interface; the index is global into the training set.
pub fn nlls_evaluate(data: &ClassificationDataset, _agent: usize, x: &[f64], xi: usize) -> f64 {
    sample_loss(&data.train[xi], x)
}

/// Full-shard average gradient of agent `agent`.
pub fn nlls_true_gradient(data: &ClassificationDataset, agent: usize, x: &[f64]) -> Vec<f64> {
    mean_gradient(&data.train[data.shards[agent].clone()], x)
}

fn mean_gradient(samples: &[Example], x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let w = 1.0 / samples.len() as f64;
    for ex in samples {
        accumulate_sample_gradient(ex, x, &mut g, w);
    }
    g
}

/// Fraction of test samples whose predicted class matches the label.
/// The prediction is `aᵀx ≥ 0`, the same test used to generate labels, so a
/// tie `φ = 1/2` classifies as 1.
pub fn accuracy(data: &ClassificationDataset, x: &[f64]) -> f64 {
    if data.test.is_empty() {
        return 0.0;
    }
    let hits = data
        .test
        .iter()
        .filter(|ex| u8::from(dot(&ex.features, x) >= 0.0) == ex.label)
        .count();
    hits as f64 / data.test.len() as f64
}

/// Rows of `features..., label` joined by `delim`.
pub fn to_delimited(samples: &[Example], delim: char) -> String {
    let mut s = String::new();
    for ex in samples {
        for v in &ex.features {
            s.push_str(&v.to_string());
            s.push(delim);
        }
        s.push_str(&ex.label.to_string());
        s.push('\n');
    }
    s
}

pub fn parse_delimited(text: &str, delim: char) -> Result<Vec<Example>, DatasetError> {
    let mut out = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let err = |msg: String| DatasetError::Parse { line: idx + 1, msg };
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(delim).map(str::trim).collect();
        if fields.len() < 2 {
            return Err(err("need at least one feature and a label".into()));
        }
        if *width.get_or_insert(fields.len()) != fields.len() {
            return Err(err(format!("expected {} fields, got {}", width.unwrap(), fields.len())));
        }
        let (label, feats) = fields.split_last().unwrap();
        let label = match *label {
            "0" => 0,
            "1" => 1,
            other => return Err(err(format!("label must be 0 or 1, got `{other}`"))),
        };
        let features = feats
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| err(format!("{e}"))))
            .collect::<Result<_, _>>()?;
        out.push(Example { features, label });
    }
    Ok(out)
}

/// Whether agents draw from their own shard or from the whole training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShardMode {
    #[default]
    Partitioned,
    Shared,
}

/// The classification benchmark as a [`StochasticProblem`]; ξ is a training
/// index drawn uniformly (with replacement) from the agent's pool.
#[derive(Debug, Clone)]
pub struct NllsProblem {
    data: Arc<ClassificationDataset>,
    mode: ShardMode,
}

impl NllsProblem {
    pub fn new(data: Arc<ClassificationDataset>, mode: ShardMode) -> Self {
        Self { data, mode }
    }

    pub fn data(&self) -> &ClassificationDataset {
        &self.data
    }

    fn pool(&self, agent: usize) -> Range<usize> {
        match self.mode {
            ShardMode::Partitioned => self.data.shards[agent].clone(),
            ShardMode::Shared => 0..self.data.train.len(),
        }
    }
}

impl StochasticProblem for NllsProblem {
    type Sample = usize;

    fn name(&self) -> &str {
        "classification"
    }

    fn dimension(&self) -> usize {
        self.data.dim
    }

    fn agents(&self) -> usize {
        self.data.agents()
    }

    fn sample<R: Rng + ?Sized>(&self, agent: usize, rng: &mut R) -> usize {
        rng.random_range(self.pool(agent))
    }

    fn evaluate(&self, agent: usize, x: &[f64], xi: &usize) -> f64 {
        nlls_evaluate(&self.data, agent, x, *xi)
    }

    fn sample_gradient(&self, _agent: usize, x: &[f64], xi: &usize) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        accumulate_sample_gradient(&self.data.train[*xi], x, &mut g, 1.0);
        g
    }

    fn local_loss(&self, agent: usize, x: &[f64]) -> f64 {
        let pool = &self.data.train[self.pool(agent)];
        pool.iter().map(|ex| sample_loss(ex, x)).sum::<f64>() / pool.len() as f64
    }

    fn local_gradient(&self, agent: usize, x: &[f64]) -> Vec<f64> {
        mean_gradient(&self.data.train[self.pool(agent)], x)
    }

    fn accuracy(&self, x: &[f64]) -> Option<f64> {
        Some(accuracy(&self.data, x))
    }
}
