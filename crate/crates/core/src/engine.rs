//! Synchronous rounds of query, Bayes update and neighborhood averaging.
//!
//! Besides the grid beliefs, the state tracks `log2 p_{i,t}(X*)` at the exact
//! target point. It follows the same operations as the grid (the likelihood
//! factor at `X*`, the weighted log-sum, the normalizers), but is not capped
//! at `log2 M` once a posterior concentrates inside a single cell.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::belief::{self, BeliefDensity, QueryPoint};
use crate::channel::ResponseOracle;
use crate::config::ExperimentConfig;
use crate::metrics::TrialTrace;
use crate::network::{self, SocialNetwork};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmVariant {
    /// Bayes update, then geometric averaging of beliefs over neighbors.
    SocialLearning,
    /// Bayes update only.
    NoCollaboration,
    /// Bayes update, then arithmetic mixing of beliefs over neighbors.
    LinearConsensus,
}

impl AlgorithmVariant {
    pub const ALL: [AlgorithmVariant; 3] = [
        Self::SocialLearning,
        Self::NoCollaboration,
        Self::LinearConsensus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SocialLearning => "social",
            Self::NoCollaboration => "no-collab",
            Self::LinearConsensus => "linear",
        }
    }
}

impl fmt::Display for AlgorithmVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "social" => Ok(Self::SocialLearning),
            "no-collab" => Ok(Self::NoCollaboration),
            "linear" => Ok(Self::LinearConsensus),
            other => Err(format!(
                "unknown variant {other:?} (social|no-collab|linear|all)"
            )),
        }
    }
}

/// What happened during one step `t -> t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// Medians of the round-`t` beliefs.
    pub query_points: Vec<f64>,
    pub responses: Vec<bool>,
    /// `log2` of the normalizer removed by each agent's averaging stage.
    pub d_terms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    round: usize,
    beliefs: Vec<BeliefDensity>,
    log_belief_at_target: Vec<f64>,
    oracle: ResponseOracle,
    network: SocialNetwork,
}

impl SimulationState {
    /// Uniform priors for every agent.
    pub fn new(network: SocialNetwork, oracle: ResponseOracle, grid_size: usize) -> Result<Self> {
        let n = network.n_agents();
        let prior = BeliefDensity::uniform(grid_size)?;
        Self::with_beliefs(network, oracle, vec![prior; n])
    }

    /// Starts from arbitrary priors, which must share one grid size.
    pub fn with_beliefs(
        network: SocialNetwork,
        oracle: ResponseOracle,
        beliefs: Vec<BeliefDensity>,
    ) -> Result<Self> {
        let n = network.n_agents();
        for (what, found) in [("error probabilities", oracle.n_agents()), ("beliefs", beliefs.len())] {
            if found != n {
                return Err(Error::AgentCount {
                    n_agents: n,
                    found,
                    what,
                });
            }
        }
        let grid_size = beliefs[0].grid_size();
        if let Some(b) = beliefs.iter().find(|b| b.grid_size() != grid_size) {
            return Err(belief::BeliefError::GridMismatch {
                expected: grid_size,
                found: b.grid_size(),
            }
            .into());
        }
        let log_belief_at_target = beliefs
            .iter()
            .map(|b| b.log_density_at(oracle.target()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self {
            round: 0,
            beliefs,
            log_belief_at_target,
            oracle,
            network,
        })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn beliefs(&self) -> &[BeliefDensity] {
        &self.beliefs
    }

    /// `log2 p_{i,t}(X*)` for every agent.
    pub fn log_belief_at_target(&self) -> &[f64] {
        &self.log_belief_at_target
    }

    pub fn oracle(&self) -> &ResponseOracle {
        &self.oracle
    }

    pub fn network(&self) -> &SocialNetwork {
        &self.network
    }

    pub fn query_points(&self) -> Vec<QueryPoint> {
        self.beliefs.iter().map(BeliefDensity::bisect).collect()
    }

    /// One round with responses drawn from the oracle.
    pub fn step(&mut self, variant: AlgorithmVariant) -> Result<RoundRecord> {
        let queries = self.query_points();
        let responses = queries
            .iter()
            .enumerate()
            .map(|(i, &q)| self.oracle.respond(i, q))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        self.advance(variant, queries, responses)
    }

    /// One round with the given responses; the oracle's streams are untouched.
    pub fn step_with_responses(
        &mut self,
        variant: AlgorithmVariant,
        responses: &[bool],
    ) -> Result<RoundRecord> {
        if responses.len() != self.beliefs.len() {
            return Err(Error::AgentCount {
                n_agents: self.beliefs.len(),
                found: responses.len(),
                what: "responses",
            });
        }
        let queries = self.query_points();
        self.advance(variant, queries, responses.to_vec())
    }

    fn advance(
        &mut self,
        variant: AlgorithmVariant,
        queries: Vec<QueryPoint>,
        responses: Vec<bool>,
    ) -> Result<RoundRecord> {
        let target = self.oracle.target();
        let epsilons = self.oracle.epsilons();

        // Stage 1 reads only round-t beliefs.
        let mut updated = Vec::with_capacity(self.beliefs.len());
        let mut log_at_target = Vec::with_capacity(self.beliefs.len());
        for (i, belief) in self.beliefs.iter().enumerate() {
            let (q, y, eps) = (queries[i], responses[i], epsilons[i]);
            let post = belief.bayes_update(q, y, eps)?;
            let (inside, outside) = belief::likelihood(y, eps);
            let factor = if target <= q.value() { inside } else { outside };
            log_at_target
                .push(self.log_belief_at_target[i] + (2.0 * factor).log2() - post.log2_integral);
            updated.push(post.belief);
        }

        // Stage 2 reads only Stage-1 outputs.
        let n = updated.len();
        let (beliefs, log_belief_at_target, d_terms) = match variant {
            AlgorithmVariant::NoCollaboration => (updated, log_at_target, vec![0.0; n]),
            AlgorithmVariant::SocialLearning | AlgorithmVariant::LinearConsensus => {
                let mut beliefs = Vec::with_capacity(n);
                let mut at_target = Vec::with_capacity(n);
                let mut d_terms = Vec::with_capacity(n);
                for row in self.network.weights() {
                    let (mixed, combined) = if variant == AlgorithmVariant::SocialLearning {
                        (
                            belief::geometric_average(&updated, row)?,
                            weighted_sum(row, &log_at_target),
                        )
                    } else {
                        (
                            belief::arithmetic_mixture(&updated, row)?,
                            weighted_log_sum_exp2(row, &log_at_target),
                        )
                    };
                    at_target.push(combined - mixed.log2_integral);
                    d_terms.push(mixed.log2_integral);
                    beliefs.push(mixed.belief);
                }
                (beliefs, at_target, d_terms)
            }
        };

        self.beliefs = beliefs;
        self.log_belief_at_target = log_belief_at_target;
        self.round += 1;
        Ok(RoundRecord {
            query_points: queries.into_iter().map(QueryPoint::value).collect(),
            responses,
            d_terms,
        })
    }
}

fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    weights
        .iter()
        .zip(values)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, v)| w * v)
        .sum()
}

/// `log2 sum_j w_j 2^{v_j}`.
fn weighted_log_sum_exp2(weights: &[f64], values: &[f64]) -> f64 {
    if let Some(j) = weights.iter().position(|&w| w == 1.0) {
        return values[j];
    }
    let active = || weights.iter().zip(values).filter(|(w, _)| **w > 0.0);
    let max = active().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    max + active()
        .map(|(w, v)| w * (v - max).exp2())
        .sum::<f64>()
        .log2()
}

/// The network of a trial: drawn from `seed`'s network stream.
pub fn build_network(config: &ExperimentConfig, seed: u64) -> Result<SocialNetwork> {
    let mut rng = seed::stream(seed, seed::NETWORK_STREAM);
    Ok(network::random_geometric_graph(
        config.n_agents,
        config.radius,
        &mut rng,
        config.max_retries,
        config.weight_rule,
    )?)
}

/// Runs `config.horizon` rounds of `variant` for one Monte Carlo trial.
///
/// Without `fixed_network` the network is generated from `trial_seed`. The
/// target is drawn uniformly from the trial seed unless the config fixes it;
/// agent `i`'s responses come from the stream `(trial_seed, i)`.
pub fn run_trial(
    config: &ExperimentConfig,
    variant: AlgorithmVariant,
    trial_seed: u64,
    fixed_network: Option<&SocialNetwork>,
) -> Result<TrialTrace> {
    let network = match fixed_network {
        Some(net) => net.clone(),
        None => build_network(config, trial_seed)?,
    };
    let centrality = network.stationary_distribution()?;
    let epsilons = network::assign_errors_by_centrality(
        &centrality,
        config.low_eps,
        config.high_eps,
        config.n_low,
    );
    let rate_bound = network::rate_bound(&centrality, &epsilons)?;
    let target = match config.target {
        Some(t) => t,
        None => seed::stream(trial_seed, seed::TARGET_STREAM).random::<f64>(),
    };
    let oracle = ResponseOracle::new(target, epsilons.clone(), trial_seed)?;
    let mut state = SimulationState::new(network, oracle, config.grid_size)?;

    let rounds = config.horizon + 1;
    let mut query_points = Vec::with_capacity(rounds);
    let mut log_belief_at_target = Vec::with_capacity(rounds);
    let mut d_terms = Vec::with_capacity(config.horizon);
    for _ in 0..config.horizon {
        log_belief_at_target.push(state.log_belief_at_target().to_vec());
        let record = state.step(variant)?;
        query_points.push(record.query_points);
        d_terms.push(record.d_terms);
    }
    log_belief_at_target.push(state.log_belief_at_target().to_vec());
    query_points.push(state.query_points().into_iter().map(QueryPoint::value).collect());

    Ok(TrialTrace {
        target,
        epsilons,
        centrality: centrality.as_slice().to_vec(),
        rate_bound,
        query_points,
        log_belief_at_target,
        d_terms,
    })
}
