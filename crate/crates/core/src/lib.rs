//! Distributed probabilistic bisection with social learning.
//!
//! A network of agents searches for a hidden point `X*` in `[0, 1]`. Every
//! round each agent queries whether the target lies below the median of its
//! own posterior, receives an answer through a binary symmetric channel and
//! performs a Bayesian update. Agents then average their log-beliefs with
//! their neighbors using a row-stochastic interaction matrix.
//!
//! Modules:
//! - [`belief`]: grid densities, bisection, the Bayes update and averaging.
//! - [`channel`]: noisy responses and channel capacity.
//! - [`network`]: random geometric graphs, interaction matrices, centrality
//!   and the rate bound `K = sum_i v_i C(eps_i)`.
//! - [`engine`]: synchronous rounds for all algorithm variants.
//! - [`metrics`]: MSE curves, concentration slopes and Monte Carlo summaries.
//! - [`config`] and [`runner`]: experiment configuration and CSV output.

pub mod belief;
pub mod channel;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod network;
pub mod runner;
pub mod seed;

use std::path::PathBuf;

use thiserror::Error;

pub use belief::{BeliefDensity, BeliefError, QueryPoint};
pub use channel::{ChannelError, ResponseOracle};
pub use config::{ExperimentConfig, Violation};
pub use engine::{AlgorithmVariant, SimulationState};
pub use metrics::{MetricsError, Summary, TrialTrace};
pub use network::{NetworkError, SocialNetwork, StationaryDistribution, WeightRule};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid configuration: {}", config::describe(.0))]
    Config(Vec<Violation>),
    #[error("{n_agents} agents but {found} {what}")]
    AgentCount {
        n_agents: usize,
        found: usize,
        what: &'static str,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("failed to build worker pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T> = std::result::Result<T, Error>;
