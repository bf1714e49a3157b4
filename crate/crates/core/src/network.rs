//! Agent graphs, their stochastic interaction matrices, eigenvector
//! centrality and the network learning-rate bound.

use std::io::{self, Write};
use std::str::FromStr;

use petgraph::unionfind::UnionFind;
use rand::Rng;
use thiserror::Error;

use crate::channel::{self, ChannelError};

/// Row sums of an interaction matrix must be within this of one.
pub const ROW_SUM_TOL: f64 = 1e-12;
pub const STATIONARY_TOL: f64 = 1e-12;
pub const STATIONARY_MAX_ITER: usize = 1_000_000;
pub const DEFAULT_MAX_RETRIES: usize = 1000;
pub const DEFAULT_RADIUS: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network needs at least one agent")]
    Empty,
    #[error("adjacency matrix is not square")]
    NotSquare,
    #[error("adjacency is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("radius must lie in (0, sqrt 2], got {0}")]
    InvalidRadius(f64),
    #[error("no connected graph after {0} attempts; radius too small")]
    RetryLimit(usize),
    #[error("power iteration did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0} positions for {1} agents")]
    PositionCount(usize, usize),
    #[error("unknown weight rule {0:?}")]
    UnknownRule(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

pub type Result<T> = std::result::Result<T, NetworkError>;

/// How an undirected graph is turned into a row-stochastic matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightRule {
    /// `1 / (deg(i) + 1)` on every neighbor and on the self-loop.
    #[default]
    ClosedNeighborhood,
    /// `1 / (1 + max(deg(i), deg(j)))` per edge, remainder on the diagonal.
    Metropolis,
}

impl FromStr for WeightRule {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" | "closed-neighborhood" => Ok(Self::ClosedNeighborhood),
            "metropolis" => Ok(Self::Metropolis),
            other => Err(NetworkError::UnknownRule(other.to_owned())),
        }
    }
}

impl WeightRule {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ClosedNeighborhood => "equal",
            Self::Metropolis => "metropolis",
        }
    }
}

fn check_adjacency(adjacency: &[Vec<bool>]) -> Result<usize> {
    let n = adjacency.len();
    if n == 0 {
        return Err(NetworkError::Empty);
    }
    if adjacency.iter().any(|row| row.len() != n) {
        return Err(NetworkError::NotSquare);
    }
    for i in 0..n {
        for j in i + 1..n {
            if adjacency[i][j] != adjacency[j][i] {
                return Err(NetworkError::NotSymmetric(i, j));
            }
        }
    }
    Ok(n)
}

fn degrees(adjacency: &[Vec<bool>]) -> Vec<usize> {
    adjacency
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().filter(|&(j, &e)| e && j != i).count())
        .collect()
}

/// Union-find connectivity over the off-diagonal edges.
pub fn is_connected(adjacency: &[Vec<bool>]) -> bool {
    let n = adjacency.len();
    let mut sets = UnionFind::<usize>::new(n);
    let mut components = n;
    for (i, row) in adjacency.iter().enumerate() {
        for (j, &edge) in row.iter().enumerate().skip(i + 1) {
            if edge && sets.union(i, j) {
                components -= 1;
            }
        }
    }
    components <= 1
}

/// Row-stochastic interaction matrix for a connected, symmetric adjacency.
/// Entries are positive exactly on edges and on the diagonal.
pub fn stochasticize(adjacency: &[Vec<bool>], rule: WeightRule) -> Result<Vec<Vec<f64>>> {
    let n = check_adjacency(adjacency)?;
    if !is_connected(adjacency) {
        return Err(NetworkError::Disconnected);
    }
    let deg = degrees(adjacency);
    let weights = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            match rule {
                WeightRule::ClosedNeighborhood => {
                    let w = 1.0 / (deg[i] + 1) as f64;
                    for (j, r) in row.iter_mut().enumerate() {
                        if j == i || adjacency[i][j] {
                            *r = w;
                        }
                    }
                }
                WeightRule::Metropolis => {
                    let mut off = 0.0;
                    for j in (0..n).filter(|&j| j != i && adjacency[i][j]) {
                        row[j] = 1.0 / (1 + deg[i].max(deg[j])) as f64;
                        off += row[j];
                    }
                    row[i] = 1.0 - off;
                }
            }
            row
        })
        .collect();
    Ok(weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocialNetwork {
    adjacency: Vec<Vec<bool>>,
    weights: Vec<Vec<f64>>,
    positions: Vec<[f64; 2]>,
}

impl SocialNetwork {
    /// Builds a connected network. Without positions, agents are laid out on
    /// a circle for export purposes.
    pub fn from_adjacency(
        adjacency: Vec<Vec<bool>>,
        positions: Option<Vec<[f64; 2]>>,
        rule: WeightRule,
    ) -> Result<Self> {
        let weights = stochasticize(&adjacency, rule)?;
        let n = adjacency.len();
        let positions = match positions {
            Some(p) if p.len() != n => return Err(NetworkError::PositionCount(p.len(), n)),
            Some(p) => p,
            None => circle_layout(n),
        };
        Ok(Self {
            adjacency,
            weights,
            positions,
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        let adjacency = (0..n).map(|i| (0..n).map(|j| i != j).collect()).collect();
        Self::from_adjacency(adjacency, None, WeightRule::default())
    }

    pub fn ring(n: usize) -> Result<Self> {
        let adjacency = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| i != j && ((i + 1) % n == j || (j + 1) % n == i))
                    .collect()
            })
            .collect();
        Self::from_adjacency(adjacency, None, WeightRule::default())
    }

    /// Agent 0 is the hub.
    pub fn star(n: usize) -> Result<Self> {
        let adjacency = (0..n)
            .map(|i| (0..n).map(|j| i != j && (i == 0 || j == 0)).collect())
            .collect();
        Self::from_adjacency(adjacency, None, WeightRule::default())
    }

    /// Agents that never talk to each other: no edges and `A = I`. Only
    /// connected (and therefore a valid social network) for a single agent;
    /// it exists as the no-collaboration reference.
    pub fn isolated(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(NetworkError::Empty);
        }
        let weights = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Ok(Self {
            adjacency: vec![vec![false; n]; n],
            weights,
            positions: circle_layout(n),
        })
    }

    pub fn n_agents(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    /// The interaction matrix `A`, one row per agent.
    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn degrees(&self) -> Vec<usize> {
        degrees(&self.adjacency)
    }

    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_agents();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[i][j])
            .collect()
    }

    pub fn stationary_distribution(&self) -> Result<StationaryDistribution> {
        stationary_distribution(&self.weights)
    }

    /// One `i j` line per undirected edge.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}")?;
        }
        Ok(())
    }

    /// CSV node table with columns `i,x,y,epsilon,v`.
    pub fn write_node_table<W: Write>(
        &self,
        out: W,
        epsilons: &[f64],
        centrality: &StationaryDistribution,
    ) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "x", "y", "epsilon", "v"])?;
        for (i, p) in self.positions.iter().enumerate() {
            w.serialize((i, p[0], p[1], epsilons[i], centrality.as_slice()[i]))?;
        }
        w.flush()
    }
}

fn circle_layout(n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            [0.5 + 0.4 * a.cos(), 0.5 + 0.4 * a.sin()]
        })
        .collect()
}

/// Points uniform in the unit square, joined when within `radius`. Whole
/// graphs are redrawn until one is connected.
pub fn random_geometric_graph<R: Rng + ?Sized>(
    n: usize,
    radius: f64,
    rng: &mut R,
    max_retries: usize,
    rule: WeightRule,
) -> Result<SocialNetwork> {
    if n == 0 {
        return Err(NetworkError::Empty);
    }
    if !(radius > 0.0 && radius <= std::f64::consts::SQRT_2) {
        return Err(NetworkError::InvalidRadius(radius));
    }
    for _ in 0..max_retries.max(1) {
        let positions: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let adjacency: Vec<Vec<bool>> = positions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                positions
                    .iter()
                    .enumerate()
                    .map(|(j, q)| i != j && (p[0] - q[0]).hypot(p[1] - q[1]) <= radius)
                    .collect()
            })
            .collect();
        if is_connected(&adjacency) {
            return SocialNetwork::from_adjacency(adjacency, Some(positions), rule);
        }
    }
    Err(NetworkError::RetryLimit(max_retries.max(1)))
}

/// Normalized left eigenvector of `A` for eigenvalue one.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution(Vec<f64>);

impl StationaryDistribution {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `max_j |(vA)_j - v_j|`.
    pub fn residual(&self, weights: &[Vec<f64>]) -> f64 {
        left_multiply(&self.0, weights)
            .iter()
            .zip(&self.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn left_multiply(v: &[f64], weights: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (vi, row) in v.iter().zip(weights) {
        for (o, a) in out.iter_mut().zip(row) {
            *o += vi * a;
        }
    }
    out
}

/// Left power iteration `v <- vA` from the uniform vector.
pub fn stationary_distribution(weights: &[Vec<f64>]) -> Result<StationaryDistribution> {
    let n = weights.len();
    if n == 0 {
        return Err(NetworkError::Empty);
    }
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..STATIONARY_MAX_ITER {
        let mut next = left_multiply(&v, weights);
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= sum);
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta <= STATIONARY_TOL {
            return Ok(StationaryDistribution(v));
        }
    }
    Err(NetworkError::NoConvergence(STATIONARY_MAX_ITER))
}

/// `K = sum_i v_i C(eps_i)`.
pub fn rate_bound(centrality: &StationaryDistribution, epsilons: &[f64]) -> Result<f64> {
    if centrality.len() != epsilons.len() {
        return Err(NetworkError::LengthMismatch(centrality.len(), epsilons.len()));
    }
    centrality
        .as_slice()
        .iter()
        .zip(epsilons)
        .try_fold(0.0, |k, (v, &e)| Ok(k + v * channel::capacity(e)?))
}

/// `low_eps` for the `n_low` most central agents (ties go to the lower
/// index), `high_eps` for everyone else.
pub fn assign_errors_by_centrality(
    centrality: &StationaryDistribution,
    low_eps: f64,
    high_eps: f64,
    n_low: usize,
) -> Vec<f64> {
    let v = centrality.as_slice();
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut eps = vec![high_eps; v.len()];
    for &i in order.iter().take(n_low) {
        eps[i] = low_eps;
    }
    eps
}
