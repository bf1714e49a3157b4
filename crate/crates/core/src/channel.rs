//! Noisy membership responses through a binary symmetric channel.

use rand::Rng;
use thiserror::Error;

use crate::belief::QueryPoint;
use crate::seed::{self, StreamRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("error probability must lie in (0, 0.5), got {0}")]
    EpsilonOutOfRange(f64),
    #[error("capacity is defined for error probabilities in (0, 0.5], got {0}")]
    CapacityDomain(f64),
    #[error("target {0} lies outside [0, 1]")]
    TargetOutOfDomain(f64),
    #[error("agent {agent} out of range for {n_agents} agents")]
    InvalidAgent { agent: usize, n_agents: usize },
}

/// Whether `target` lies in the query interval `[0, x_hat]` (closed).
pub fn true_bit(target: f64, query: QueryPoint) -> bool {
    target <= query.value()
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Capacity `1 - H(eps)` of a binary symmetric channel.
pub fn capacity(epsilon: f64) -> Result<f64, ChannelError> {
    if epsilon > 0.0 && epsilon <= 0.5 {
        Ok(1.0 - binary_entropy(epsilon))
    } else {
        Err(ChannelError::CapacityDomain(epsilon))
    }
}

/// Hidden target plus one independent noise stream per agent.
#[derive(Debug, Clone)]
pub struct ResponseOracle {
    target: f64,
    epsilons: Vec<f64>,
    streams: Vec<StreamRng>,
}

impl ResponseOracle {
    /// Agent `i` draws from the stream derived from `(seed, i)`.
    pub fn new(target: f64, epsilons: Vec<f64>, seed: u64) -> Result<Self, ChannelError> {
        if !(0.0..=1.0).contains(&target) {
            return Err(ChannelError::TargetOutOfDomain(target));
        }
        if let Some(&e) = epsilons.iter().find(|&&e| !(e > 0.0 && e < 0.5)) {
            return Err(ChannelError::EpsilonOutOfRange(e));
        }
        let streams = (0..epsilons.len() as u64)
            .map(|i| seed::stream(seed, i))
            .collect();
        Ok(Self {
            target,
            epsilons,
            streams,
        })
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn n_agents(&self) -> usize {
        self.epsilons.len()
    }

    pub fn true_bit(&self, query: QueryPoint) -> bool {
        true_bit(self.target, query)
    }

    /// Noisy answer for `agent`: the true bit, flipped with probability
    /// `eps[agent]`. Consumes exactly one draw from that agent's stream.
    pub fn respond(&mut self, agent: usize, query: QueryPoint) -> Result<bool, ChannelError> {
        let n_agents = self.n_agents();
        let rng = self
            .streams
            .get_mut(agent)
            .ok_or(ChannelError::InvalidAgent { agent, n_agents })?;
        let flip = rng.random::<f64>() < self.epsilons[agent];
        Ok(true_bit(self.target, query) != flip)
    }
}
