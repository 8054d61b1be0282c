//! Zeroth-order coordinate gradient estimators.
//!
//! Both estimators probe a black-box oracle along a random subset `S` of the
//! standard basis directions and rescale by `p / n_c` so that, averaged over
//! the choice of `S`, the estimate matches the full finite-difference vector.
//! The oracle passed in is expected to hold one realization ξ fixed for every
//! call made during a single estimate.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("coordinate subset size {n_c} must lie in [1, {p}]")]
    BadSubsetSize { p: usize, n_c: usize },
    #[error("smoothing radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("oracle returned {value} at the base point")]
    NonFiniteBase { value: f64 },
    #[error("oracle returned {value} probing coordinate {coordinate}")]
    NonFinite { coordinate: usize, value: f64 },
}

/// Distinct coordinate indices in `[0, p)`, stored ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateSample {
    p: usize,
    indices: Vec<usize>,
}

impl CoordinateSample {
    /// Builds a sample from explicit indices (deduplicated, sorted).
    pub fn new(p: usize, mut indices: Vec<usize>) -> Result<Self, EstimateError> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() || indices.iter().any(|&j| j >= p) {
            return Err(EstimateError::BadSubsetSize { p, n_c: indices.len() });
        }
        Ok(Self { p, indices })
    }

    pub fn full(p: usize) -> Self {
        Self { p, indices: (0..p).collect() }
    }

    pub fn dimension(&self) -> usize {
        self.p
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// `p / n_c`, the subsampling compensation factor.
    pub fn scale(&self) -> f64 {
        self.p as f64 / self.indices.len() as f64
    }
}

/// Uniform size-`n_c` subset of `[0, p)` without replacement.
pub fn sample_coordinates<R: Rng + ?Sized>(
    p: usize,
    n_c: usize,
    rng: &mut R,
) -> Result<CoordinateSample, EstimateError> {
    if n_c == 0 || n_c > p {
        return Err(EstimateError::BadSubsetSize { p, n_c });
    }
    let mut indices = rand::seq::index::sample(rng, p, n_c).into_vec();
    indices.sort_unstable();
    Ok(CoordinateSample { p, indices })
}

/// How the smoothing radius δ evolves over iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothingSchedule {
    /// `δ_k = κ / (p^{1/4} n^{1/4} (k+1)^{1/4})`, the largest radius the
    /// convergence theory admits.
    TheoremDecay { kappa_delta: f64 },
    /// Constant radius.
    Fixed(f64),
}

impl SmoothingSchedule {
    /// Fixed radius `10 / sqrt(T d)` used by the classification benchmark.
    pub fn benchmark(horizon: usize, dim: usize) -> Self {
        Self::Fixed(10.0 / ((horizon as f64) * (dim as f64)).sqrt())
    }

    /// Radius used at iteration `k` by a network of `n` agents in dimension `p`.
    pub fn radius(&self, n: usize, p: usize, k: usize) -> f64 {
        match *self {
            Self::TheoremDecay { kappa_delta } => {
                kappa_delta / ((p as f64) * (n as f64) * ((k + 1) as f64)).powf(0.25)
            }
            Self::Fixed(delta) => delta,
        }
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        let v = match *self {
            Self::TheoremDecay { kappa_delta } => kappa_delta,
            Self::Fixed(d) => d,
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(EstimateError::BadRadius(v))
        }
    }
}

/// Which finite-difference formula an agent uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// One-sided differences against a shared base value.
    Forward,
    /// Symmetric two-point differences.
    Central,
}

impl Estimator {
    pub fn estimate<F>(
        self,
        oracle: F,
        x: &[f64],
        sample: &CoordinateSample,
        delta: f64,
    ) -> Result<Vec<f64>, EstimateError>
    where
        F: FnMut(&[f64]) -> f64,
    {
        match self {
            Self::Forward => forward_estimate(oracle, x, sample, delta),
            Self::Central => central_estimate(oracle, x, sample, delta),
        }
    }

    /// Oracle evaluations spent per estimate with `n_c` coordinates.
    pub fn calls_per_estimate(self, n_c: usize) -> u64 {
        match self {
            Self::Forward => n_c as u64 + 1,
            Self::Central => 2 * n_c as u64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Forward => "forward",
            Self::Central => "central",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" | "fwd" | "1" => Ok(Self::Forward),
            "central" | "ctr" | "2" => Ok(Self::Central),
            other => Err(format!("unknown estimator `{other}` (expected forward|central)")),
        }
    }
}

fn check_radius(delta: f64) -> Result<(), EstimateError> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(EstimateError::BadRadius(delta))
    }
}

/// `(p/n_c) Σ_{j∈S} (F(x+δe_j) − F(x))/δ · e_j`, with `|S| + 1` oracle calls.
pub fn forward_estimate<F>(
    mut oracle: F,
    x: &[f64],
    sample: &CoordinateSample,
    delta: f64,
) -> Result<Vec<f64>, EstimateError>
where
    F: FnMut(&[f64]) -> f64,
{
    check_radius(delta)?;
    let scale = sample.scale();
    let base = oracle(x);
    if !base.is_finite() {
        return Err(EstimateError::NonFiniteBase { value: base });
    }
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for &j in sample.indices() {
        probe[j] = x[j] + delta;
        let up = oracle(&probe);
        probe[j] = x[j];
        if !up.is_finite() {
            return Err(EstimateError::NonFinite { coordinate: j, value: up });
        }
        g[j] = scale * (up - base) / delta;
    }
    Ok(g)
}

/// `(p/n_c) Σ_{j∈S} (F(x+δe_j) − F(x−δe_j))/(2δ) · e_j`, with `2|S|` oracle calls.
pub fn central_estimate<F>(
    mut oracle: F,
    x: &[f64],
    sample: &CoordinateSample,
    delta: f64,
) -> Result<Vec<f64>, EstimateError>
where
    F: FnMut(&[f64]) -> f64,
{
    check_radius(delta)?;
    let scale = sample.scale();
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for &j in sample.indices() {
        probe[j] = x[j] + delta;
        let up = oracle(&probe);
        probe[j] = x[j] - delta;
        let down = oracle(&probe);
        probe[j] = x[j];
        for v in [up, down] {
            if !v.is_finite() {
                return Err(EstimateError::NonFinite { coordinate: j, value: v });
            }
        }
        g[j] = scale * (up - down) / (2.0 * delta);
    }
    Ok(g)
}
