//! Evaluation quantities: network MSE, concentration slopes and Monte Carlo
//! aggregation.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("round {t} outside trace of {rounds} rounds")]
    RoundOutOfRange { t: usize, rounds: usize },
    #[error("agent {agent} out of range for {n_agents} agents")]
    AgentOutOfRange { agent: usize, n_agents: usize },
    #[error("slope window [{0}, {1}] needs at least 3 rounds inside the trace")]
    WindowTooShort(usize, usize),
    #[error("no traces to aggregate")]
    Empty,
    #[error("traces have inconsistent dimensions")]
    Inconsistent,
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Everything recorded during one Monte Carlo trial.
///
/// Rows of `query_points` and `log_belief_at_target` are indexed by round
/// `t = 0..=horizon`; rows of `d_terms` by the step `t -> t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    pub target: f64,
    pub epsilons: Vec<f64>,
    pub centrality: Vec<f64>,
    pub rate_bound: f64,
    pub query_points: Vec<Vec<f64>>,
    /// `log2 p_{i,t}(X*)` per round and agent.
    pub log_belief_at_target: Vec<Vec<f64>>,
    /// `log2` of the normalizer removed by the averaging stage.
    pub d_terms: Vec<Vec<f64>>,
}

impl TrialTrace {
    pub fn horizon(&self) -> usize {
        self.query_points.len().saturating_sub(1)
    }

    pub fn n_agents(&self) -> usize {
        self.epsilons.len()
    }

    fn row(&self, t: usize) -> Result<&[f64]> {
        self.query_points
            .get(t)
            .map(Vec::as_slice)
            .ok_or(MetricsError::RoundOutOfRange {
                t,
                rounds: self.query_points.len(),
            })
    }

    /// Largest averaging normalizer anywhere in the trace.
    pub fn max_d_term(&self) -> f64 {
        self.d_terms
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn concentration(&self, agent: usize) -> Result<Vec<f64>> {
        if agent >= self.n_agents() {
            return Err(MetricsError::AgentOutOfRange {
                agent,
                n_agents: self.n_agents(),
            });
        }
        Ok(self.log_belief_at_target.iter().map(|r| r[agent]).collect())
    }
}

/// Mean over agents of `(x_hat - X*)^2` at round `t`.
pub fn mse_avg(trace: &TrialTrace, t: usize) -> Result<f64> {
    let row = trace.row(t)?;
    Ok(row.iter().map(|x| (x - trace.target).powi(2)).sum::<f64>() / row.len() as f64)
}

/// Worst agent's `(x_hat - X*)^2` at round `t`.
pub fn mse_max(trace: &TrialTrace, t: usize) -> Result<f64> {
    Ok(trace
        .row(t)?
        .iter()
        .map(|x| (x - trace.target).powi(2))
        .fold(0.0, f64::max))
}

/// Least-squares slope of `values` against their index.
pub fn ols_slope(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let t_mean = (n - 1) as f64 / 2.0;
    let y_mean = values.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in values.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (y - y_mean);
        sxx += dt * dt;
    }
    Some(sxy / sxx)
}

/// The last two-thirds of the rounds `0..=horizon`.
pub fn default_window(horizon: usize) -> (usize, usize) {
    (horizon / 3, horizon)
}

/// Slope in bits per round of `log2 p_{agent,t}(X*)` over the inclusive
/// window `[t0, t1]`.
pub fn slope(trace: &TrialTrace, agent: usize, window: (usize, usize)) -> Result<f64> {
    let (t0, t1) = window;
    let series = trace.concentration(agent)?;
    if t1 >= series.len() || t0 >= t1 || t1 - t0 + 1 < 3 {
        return Err(MetricsError::WindowTooShort(t0, t1));
    }
    Ok(ols_slope(&series[t0..=t1]).expect("window has at least 3 points"))
}

/// Mean and standard error of the mean. Values are summed in sorted order so
/// the result does not depend on the order of the trials.
pub fn mean_and_stderr(mut values: Vec<f64>) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    values.sort_by(f64::total_cmp);
    let naive = values.iter().sum::<f64>() / n as f64;
    // Second pass removes the rounding error of the first.
    let mean = naive + values.iter().map(|v| v - naive).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}

/// Per-round and per-agent averages over Monte Carlo trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub n_trials: usize,
    pub mse_avg_mean: Vec<f64>,
    pub mse_max_mean: Vec<f64>,
    pub mse_avg_stderr: Vec<f64>,
    pub mse_max_stderr: Vec<f64>,
    /// Empty when no slope window was requested.
    pub slope_mean: Vec<f64>,
    pub slope_stderr: Vec<f64>,
    pub epsilon_mean: Vec<f64>,
    pub centrality_mean: Vec<f64>,
    pub rate_bound_mean: f64,
}

pub fn aggregate(traces: &[TrialTrace], window: Option<(usize, usize)>) -> Result<Summary> {
    let first = traces.first().ok_or(MetricsError::Empty)?;
    let (rounds, n_agents) = (first.query_points.len(), first.n_agents());
    if traces
        .iter()
        .any(|t| t.query_points.len() != rounds || t.n_agents() != n_agents)
    {
        return Err(MetricsError::Inconsistent);
    }

    let per_round = |f: fn(&TrialTrace, usize) -> Result<f64>| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut means = Vec::with_capacity(rounds);
        let mut errs = Vec::with_capacity(rounds);
        for t in 0..rounds {
            let values = traces.iter().map(|tr| f(tr, t)).collect::<Result<Vec<_>>>()?;
            let (m, e) = mean_and_stderr(values);
            means.push(m);
            errs.push(e);
        }
        Ok((means, errs))
    };
    let (mse_avg_mean, mse_avg_stderr) = per_round(mse_avg)?;
    let (mse_max_mean, mse_max_stderr) = per_round(mse_max)?;

    let (mut slope_mean, mut slope_stderr) = (Vec::new(), Vec::new());
    if let Some(window) = window {
        for agent in 0..n_agents {
            let values = traces
                .iter()
                .map(|tr| slope(tr, agent, window))
                .collect::<Result<Vec<_>>>()?;
            let (m, e) = mean_and_stderr(values);
            slope_mean.push(m);
            slope_stderr.push(e);
        }
    }
    let per_agent = |f: fn(&TrialTrace) -> &[f64]| -> Vec<f64> {
        (0..n_agents)
            .map(|i| mean_and_stderr(traces.iter().map(|tr| f(tr)[i]).collect()).0)
            .collect()
    };

    Ok(Summary {
        n_trials: traces.len(),
        mse_avg_mean,
        mse_max_mean,
        mse_avg_stderr,
        mse_max_stderr,
        slope_mean,
        slope_stderr,
        epsilon_mean: per_agent(|tr| &tr.epsilons),
        centrality_mean: per_agent(|tr| &tr.centrality),
        rate_bound_mean: mean_and_stderr(traces.iter().map(|t| t.rate_bound).collect()).0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(target: f64, rows: Vec<Vec<f64>>) -> TrialTrace {
        let n = rows[0].len();
        TrialTrace {
            target,
            epsilons: vec![0.4; n],
            centrality: vec![1.0 / n as f64; n],
            rate_bound: 0.029,
            log_belief_at_target: (0..rows.len()).map(|t| vec![0.1 * t as f64; n]).collect(),
            d_terms: vec![vec![0.0; n]; rows.len() - 1],
            query_points: rows,
        }
    }

    #[test]
    fn mse_examples() {
        let exact = trace(0.3, vec![vec![0.3, 0.3]]);
        assert_eq!(mse_avg(&exact, 0).unwrap(), 0.0);
        assert_eq!(mse_max(&exact, 0).unwrap(), 0.0);

        let off = trace(0.5, vec![vec![0.4, 0.8]]);
        assert!((mse_avg(&off, 0).unwrap() - 0.05).abs() < 1e-15);
        assert!((mse_max(&off, 0).unwrap() - 0.09).abs() < 1e-15);

        let initial = trace(0.3, vec![vec![0.5; 4]]);
        assert!((mse_avg(&initial, 0).unwrap() - 0.04).abs() < 1e-15);

        assert_eq!(
            mse_avg(&off, 1),
            Err(MetricsError::RoundOutOfRange { t: 1, rounds: 1 })
        );
    }

    #[test]
    fn slope_examples() {
        let mut tr = trace(0.5, vec![vec![0.5]; 10]);
        tr.log_belief_at_target = vec![vec![3.0]; 10];
        assert_eq!(slope(&tr, 0, (0, 9)).unwrap(), 0.0);

        tr.log_belief_at_target = (0..10).map(|t| vec![1.7 - 0.37 * t as f64]).collect();
        assert!((slope(&tr, 0, (2, 9)).unwrap() + 0.37).abs() < 1e-12);

        assert_eq!(slope(&tr, 0, (3, 4)), Err(MetricsError::WindowTooShort(3, 4)));
        assert_eq!(slope(&tr, 0, (5, 12)), Err(MetricsError::WindowTooShort(5, 12)));
        assert!(matches!(slope(&tr, 2, (0, 9)), Err(MetricsError::AgentOutOfRange { .. })));
    }

    #[test]
    fn default_window_is_last_two_thirds() {
        assert_eq!(default_window(75), (25, 75));
        assert_eq!(default_window(2000), (666, 2000));
    }

    #[test]
    fn single_trace_summary_equals_its_metrics() {
        let tr = trace(0.3, vec![vec![0.5, 0.5], vec![0.2, 0.45], vec![0.31, 0.3]]);
        let s = aggregate(std::slice::from_ref(&tr), Some((0, 2))).unwrap();
        for t in 0..3 {
            assert_eq!(s.mse_avg_mean[t], mse_avg(&tr, t).unwrap());
            assert_eq!(s.mse_max_mean[t], mse_max(&tr, t).unwrap());
            assert_eq!(s.mse_avg_stderr[t], 0.0);
        }
        assert_eq!(s.slope_mean[0], slope(&tr, 0, (0, 2)).unwrap());
        assert_eq!(s.rate_bound_mean, 0.029);
    }

    #[test]
    fn duplicated_traces_have_zero_stderr() {
        let tr = trace(0.71, vec![vec![0.5, 0.9, 0.13], vec![0.6, 0.77, 0.7]]);
        let many = vec![tr.clone(); 7];
        let one = aggregate(std::slice::from_ref(&tr), None).unwrap();
        let s = aggregate(&many, None).unwrap();
        assert_eq!(s.mse_avg_mean, one.mse_avg_mean);
        assert_eq!(s.mse_max_mean, one.mse_max_mean);
        assert!(s.mse_avg_stderr.iter().all(|&e| e == 0.0));
        assert!(s.mse_max_stderr.iter().all(|&e| e == 0.0));
        assert!(s.slope_mean.is_empty());
    }

    #[test]
    fn aggregate_errors() {
        assert_eq!(aggregate(&[], None), Err(MetricsError::Empty));
        let a = trace(0.5, vec![vec![0.5]; 3]);
        let b = trace(0.5, vec![vec![0.5]; 4]);
        assert_eq!(aggregate(&[a, b], None), Err(MetricsError::Inconsistent));
    }
}
