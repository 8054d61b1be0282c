//! Communication topologies and their Laplacian spectra.
//!
//! Agents talk over an undirected weighted graph. The consensus step size of
//! both algorithms is bounded by `rho2 / (2 * rho(L^2))`, where `rho2` is the
//! smallest positive Laplacian eigenvalue, so this module owns the dense
//! eigen-solve that produces those numbers.

use std::collections::VecDeque;
use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use thiserror::Error;

use crate::rng;

/// Attempts made by [`erdos_renyi`] before giving up on connectivity.
pub const MAX_CONNECT_ATTEMPTS: u64 = 100;

/// Eigenvalues with magnitude below this are treated as zero.
pub const ZERO_EIGEN_TOL: f64 = 1e-9;

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("need at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("edge probability must lie in (0, 1], got {0}")]
    BadProbability(f64),
    #[error("no connected Erdős–Rényi graph found in {attempts} attempts starting at seed {seed}")]
    NotConnected { seed: u64, attempts: u64 },
    #[error("weight matrix is not {n}x{n}")]
    NotSquare { n: usize },
    #[error("invalid weight {weight} on ({i}, {j})")]
    BadWeight { i: usize, j: usize, weight: f64 },
    #[error("weights are not symmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("symmetric eigen-solver did not converge")]
    EigenNoConvergence,
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected weighted communication graph among `n` agents.
///
/// Weights are stored densely, row-major. The constructor enforces symmetry,
/// a zero diagonal and nonnegative finite entries.
#[derive(Clone, PartialEq)]
pub struct Topology {
    n: usize,
    weights: Vec<f64>,
}

impl Topology {
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self, GraphError> {
        if weights.len() != n * n {
            return Err(GraphError::NotSquare { n });
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() || w < 0.0 || (i == j && w != 0.0) {
                    return Err(GraphError::BadWeight { i, j, weight: w });
                }
                if w != weights[j * n + i] {
                    return Err(GraphError::Asymmetric { i, j });
                }
            }
        }
        Ok(Self { n, weights })
    }

    /// Graph on `n` nodes with the given undirected edges, all of weight 1.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        Self::from_weighted_edges(n, edges.iter().map(|&(i, j)| (i, j, 1.0)))
    }

    pub fn from_weighted_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        let mut weights = vec![0.0; n * n];
        for (i, j, w) in edges {
            if i >= n || j >= n || i == j || !(w.is_finite() && w > 0.0) {
                return Err(GraphError::BadWeight { i, j, weight: w });
            }
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
        Ok(Self { n, weights })
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::from_edges(n, &edges).expect("complete graph is valid")
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("path graph is valid")
    }

    pub fn ring(n: usize) -> Self {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::from_edges(n, &edges).expect("ring graph is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Neighbors of `i` (positive weight).
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.weight(i, j) > 0.0)
    }

    /// Weighted degrees `deg_i = sum_j a_ij`.
    pub fn degrees(&self) -> Vec<f64> {
        self.weights.chunks(self.n).map(|row| row.iter().sum()).collect()
    }

    /// Undirected edges `(i, j, a_ij)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let w = self.weight(i, j);
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.weights[i * self.n + j] = 0.0;
        self.weights[j * self.n + i] = 0.0;
    }

    /// Plain-text edge list: `i j weight` per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# nodes {}\n", self.n);
        for (i, j, w) in self.edges() {
            s.push_str(&format!("{i} {j} {w}\n"));
        }
        s
    }

    /// Parses an edge list. The node count is the larger of the
    /// `# nodes N` header (if present) and one past the largest index seen.
    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut declared = 0usize;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let (body, comment) = match raw.find('#') {
                Some(pos) => (&raw[..pos], Some(&raw[pos + 1..])),
                None => (raw, None),
            };
            if let Some(c) = comment {
                let mut it = c.split_whitespace();
                if it.next() == Some("nodes") {
                    if let Some(Ok(n)) = it.next().map(str::parse::<usize>) {
                        declared = declared.max(n);
                    }
                }
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() != 3 {
                return Err(GraphError::Parse {
                    line: line_no,
                    msg: format!("expected `i j weight`, got {} fields", fields.len()),
                });
            }
            let parse_err = |msg: String| GraphError::Parse { line: line_no, msg };
            let i: usize = fields[0].parse().map_err(|e| parse_err(format!("{e}")))?;
            let j: usize = fields[1].parse().map_err(|e| parse_err(format!("{e}")))?;
            let w: f64 = fields[2].parse().map_err(|e| parse_err(format!("{e}")))?;
            edges.push((i, j, w));
        }
        let n = edges
            .iter()
            .map(|&(i, j, _)| i.max(j) + 1)
            .max()
            .unwrap_or(0)
            .max(declared);
        Self::from_weighted_edges(n, edges)
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::parse_edge_list(&fs::read_to_string(path)?)
    }
}

impl fmt::Debug for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Topology")
            .field("n", &self.n)
            .field("edges", &self.edges())
            .finish()
    }
}

/// Single G(n, p) draw with unit weights, without the connectivity retry.
pub fn sample_gnp<R: Rng + ?Sized>(n: usize, prob: f64, rng: &mut R) -> Topology {
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < prob {
                weights[i * n + j] = 1.0;
                weights[j * n + i] = 1.0;
            }
        }
    }
    Topology { n, weights }
}

/// Connected Erdős–Rényi graph with unit weights.
///
/// Draws from the stream for `seed`; if the result is disconnected the draw
/// is repeated with `seed + 1`, and so on, up to [`MAX_CONNECT_ATTEMPTS`].
pub fn erdos_renyi(n: usize, prob: f64, seed: u64) -> Result<Topology, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewAgents(n));
    }
    if !(prob > 0.0 && prob <= 1.0) {
        return Err(GraphError::BadProbability(prob));
    }
    for attempt in 0..MAX_CONNECT_ATTEMPTS {
        let s = seed.wrapping_add(attempt);
        let topo = sample_gnp(n, prob, &mut rng::aux_stream(s, 0));
        if is_connected(&topo) {
            if attempt > 0 {
                log::debug!("erdos_renyi: seed {seed} disconnected, used seed {s}");
            }
            return Ok(topo);
        }
    }
    Err(GraphError::NotConnected { seed, attempts: MAX_CONNECT_ATTEMPTS })
}

/// Breadth-first reachability from node 0 over positive-weight edges.
pub fn is_connected(topo: &Topology) -> bool {
    let n = topo.n();
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for v in topo.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}

/// `L = Deg - A`.
pub fn laplacian(topo: &Topology) -> DMatrix<f64> {
    let n = topo.n();
    let deg = topo.degrees();
    DMatrix::from_fn(n, n, |i, j| if i == j { deg[i] } else { -topo.weight(i, j) })
}

/// Laplacian together with the spectral quantities that bound α.
#[derive(Debug, Clone)]
pub struct SpectralProfile {
    pub laplacian: DMatrix<f64>,
    /// Ascending eigenvalues of the Laplacian.
    pub eigenvalues: Vec<f64>,
    /// Smallest positive eigenvalue, or 0 if every eigenvalue is (numerically) zero.
    pub rho2: f64,
    /// Spectral radius of `L^2`.
    pub rho_l2: f64,
    /// `rho2 / (2 * rho_l2)`; the open upper end of the admissible consensus step.
    pub alpha_max: f64,
}

impl SpectralProfile {
    pub fn n(&self) -> usize {
        self.laplacian.nrows()
    }

    /// Number of eigenvalues treated as zero.
    pub fn null_dimension(&self) -> usize {
        self.eigenvalues.iter().filter(|v| v.abs() < ZERO_EIGEN_TOL).count()
    }
}

pub fn laplacian_spectrum(topo: &Topology) -> Result<SpectralProfile, GraphError> {
    let lap = laplacian(topo);
    let eig = SymmetricEigen::try_new(lap.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(GraphError::EigenNoConvergence)?;
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let rho2 = eigenvalues
        .iter()
        .copied()
        .find(|&v| v > ZERO_EIGEN_TOL)
        .unwrap_or(0.0);
    let rho = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rho_l2 = rho * rho;
    let alpha_max = if rho_l2 > 0.0 { rho2 / (2.0 * rho_l2) } else { 0.0 };
    Ok(SpectralProfile { laplacian: lap, eigenvalues, rho2, rho_l2, alpha_max })
}

impl fmt::Display for SpectralProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "agents      {}", self.n())?;
        let eig: Vec<String> = self.eigenvalues.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(f, "eigenvalues [{}]", eig.join(", "))?;
        writeln!(f, "rho2        {:.10}", self.rho2)?;
        writeln!(f, "rho(L^2)    {:.10}", self.rho_l2)?;
        write!(f, "alpha_max   {:.10}", self.alpha_max)
    }
}
