//! Quadratic toy with a known minimizer, used as a test oracle.
//!
//! `f_i(x) = ½‖x − c_i‖²`. The stochastic oracle is
//! `F_i(x, ξ) = ½‖x − c_i‖² + ζ ξᵀx` with `ξ ~ N(0, I)`, so the per-coordinate
//! stochastic-gradient variance is exactly `ζ²` and the perturbation survives
//! finite differencing under a shared ξ.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{dot, StochasticProblem};
use crate::rng;

#[derive(Debug, Clone)]
pub struct QuadraticToy {
    centers: Vec<Vec<f64>>,
    noise: f64,
}

impl QuadraticToy {
    pub fn new(centers: Vec<Vec<f64>>, noise: f64) -> Self {
        assert!(!centers.is_empty(), "need at least one agent");
        let p = centers[0].len();
        assert!(p >= 1 && centers.iter().all(|c| c.len() == p), "centers must share a dimension");
        assert!(noise >= 0.0 && noise.is_finite());
        Self { centers, noise }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        assert!(noise >= 0.0 && noise.is_finite());
        self.noise = noise;
        self
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// Centroid of the centers, the global minimizer.
    pub fn minimizer(&self) -> Vec<f64> {
        let n = self.centers.len() as f64;
        let mut m = vec![0.0; self.dimension()];
        for c in &self.centers {
            for (acc, v) in m.iter_mut().zip(c) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

/// Toy with centers drawn from `N(0, I)`, noise-free.
pub fn make_quadratic_toy(n_agents: usize, p: usize, seed: u64) -> QuadraticToy {
    let mut rng = rng::aux_stream(seed, 2);
    let centers = (0..n_agents)
        .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    QuadraticToy::new(centers, 0.0)
}

fn half_sq_dist(x: &[f64], c: &[f64]) -> f64 {
    0.5 * x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

impl StochasticProblem for QuadraticToy {
    /// Empty when the toy is noise-free.
    type Sample = Vec<f64>;

    fn name(&self) -> &str {
        "quadratic"
    }

    fn dimension(&self) -> usize {
        self.centers[0].len()
    }

    fn agents(&self) -> usize {
        self.centers.len()
    }

    fn sample<R: Rng + ?Sized>(&self, _agent: usize, rng: &mut R) -> Vec<f64> {
        if self.noise == 0.0 {
            return Vec::new();
        }
        (0..self.dimension()).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn evaluate(&self, agent: usize, x: &[f64], xi: &Vec<f64>) -> f64 {
        let base = half_sq_dist(x, &self.centers[agent]);
        if xi.is_empty() {
            base
        } else {
            base + self.noise * dot(xi, x)
        }
    }

    fn sample_gradient(&self, agent: usize, x: &[f64], xi: &Vec<f64>) -> Vec<f64> {
        let mut g: Vec<f64> = x.iter().zip(&self.centers[agent]).map(|(a, c)| a - c).collect();
        if !xi.is_empty() {
            for (gj, e) in g.iter_mut().zip(xi) {
                *gj += self.noise * e;
            }
        }
        g
    }

    fn local_loss(&self, agent: usize, x: &[f64]) -> f64 {
        half_sq_dist(x, &self.centers[agent])
    }

    fn local_gradient(&self, agent: usize, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.centers[agent]).map(|(a, c)| a - c).collect()
    }

    fn optimum_value(&self) -> Option<f64> {
        Some(self.loss(&self.minimizer()))
    }
}
