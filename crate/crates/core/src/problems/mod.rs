//! Stochastic black-box objectives.
//!
//! The optimizers only ever call [`StochasticProblem::sample`] and
//! [`StochasticProblem::evaluate`]. The gradient methods exist for
//! diagnostics, for the first-order reference baseline, and for tests.

mod classification;
mod quadratic;

pub use classification::{
    accuracy, make_synthetic_classification, nlls_evaluate, nlls_true_gradient, parse_delimited,
    sigmoid, to_delimited, ClassificationDataset, DatasetError, Example, NllsProblem, ShardMode,
    SyntheticSpec,
};
pub use quadratic::{make_quadratic_toy, QuadraticToy};

use rand::Rng;

/// `f(x) = (1/n) Σ_i E_ξ[F_i(x, ξ)]` over `n` agents.
pub trait StochasticProblem: Send + Sync {
    /// One realization ξ.
    type Sample: Send;

    fn name(&self) -> &str;

    /// Decision-variable dimension `p`.
    fn dimension(&self) -> usize;

    /// Number of local objectives (agents).
    fn agents(&self) -> usize;

    fn sample<R: Rng + ?Sized>(&self, agent: usize, rng: &mut R) -> Self::Sample;

    /// `F_i(x, ξ)`; deterministic in its arguments.
    fn evaluate(&self, agent: usize, x: &[f64], xi: &Self::Sample) -> f64;

    /// `∇_x F_i(x, ξ)`.
    fn sample_gradient(&self, agent: usize, x: &[f64], xi: &Self::Sample) -> Vec<f64>;

    /// Full-batch `f_i(x)`.
    fn local_loss(&self, agent: usize, x: &[f64]) -> f64;

    /// Full-batch `∇f_i(x)`.
    fn local_gradient(&self, agent: usize, x: &[f64]) -> Vec<f64>;

    /// `f(x)`.
    fn loss(&self, x: &[f64]) -> f64 {
        let n = self.agents();
        (0..n).map(|i| self.local_loss(i, x)).sum::<f64>() / n as f64
    }

    /// `∇f(x)`, the average of the local gradients.
    fn global_gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.agents();
        let mut g = vec![0.0; self.dimension()];
        for i in 0..n {
            for (acc, v) in g.iter_mut().zip(self.local_gradient(i, x)) {
                *acc += v;
            }
        }
        g.iter_mut().for_each(|v| *v /= n as f64);
        g
    }

    /// `f*` when known in closed form.
    fn optimum_value(&self) -> Option<f64> {
        None
    }

    /// Held-out classification accuracy, for problems that have a test set.
    fn accuracy(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
