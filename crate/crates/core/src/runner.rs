//! Monte Carlo batches and their CSV outputs.
//!
//! Output files, all written to `config.output_dir`:
//! - `network.edges`: `i j` per undirected edge.
//! - `nodes.csv`: `i,x,y,epsilon,v`.
//! - `mse.csv`: `variant,t,mse_avg_mean,mse_max_mean,stderr_avg,stderr_max`.
//! - `concentration.csv`: `variant,trial,agent,t,log2_p_at_target`.
//! - `summary.csv`: per-agent slopes next to `C(eps_i)` and the bound `K`.
//!
//! In per-trial network mode the network files describe trial 0.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::channel;
use crate::config::{self, ExperimentConfig, NetworkMode};
use crate::engine::{self, AlgorithmVariant};
use crate::metrics::{self, Summary, TrialTrace};
use crate::network::{self, SocialNetwork};
use crate::{seed, Error, Result};

pub const MSE_HEADER: [&str; 6] = [
    "variant",
    "t",
    "mse_avg_mean",
    "mse_max_mean",
    "stderr_avg",
    "stderr_max",
];
pub const CONCENTRATION_HEADER: [&str; 5] = ["variant", "trial", "agent", "t", "log2_p_at_target"];
pub const SUMMARY_HEADER: [&str; 8] = [
    "variant",
    "agent",
    "epsilon",
    "v",
    "capacity",
    "rate_bound",
    "slope_mean",
    "slope_stderr",
];

/// Traces of one variant, in trial order.
#[derive(Debug, Clone)]
pub struct VariantRun {
    pub variant: AlgorithmVariant,
    pub traces: Vec<TrialTrace>,
    pub summary: Summary,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    /// The shared network, or trial 0's in per-trial mode.
    pub network: SocialNetwork,
    pub runs: Vec<VariantRun>,
}

pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    seed::derive_seed(master_seed, trial as u64)
}

/// Worker count from `PBA_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("PBA_THREADS")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
}

/// Runs every selected variant over `n_trials` trials. Trials run in
/// parallel on at most `threads` workers; results are gathered in trial
/// order, so they do not depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentResults> {
    let violations = config::validate(config);
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;

    let fixed = match config.network_mode {
        NetworkMode::Fixed => Some(engine::build_network(config, config.master_seed)?),
        NetworkMode::PerTrial => None,
    };
    let network = match &fixed {
        Some(net) => net.clone(),
        None => engine::build_network(config, trial_seed(config.master_seed, 0))?,
    };

    let mut runs = Vec::new();
    for variant in config.variant.variants() {
        let traces = pool.install(|| {
            (0..config.n_trials)
                .into_par_iter()
                .map(|trial| {
                    engine::run_trial(
                        config,
                        variant,
                        trial_seed(config.master_seed, trial),
                        fixed.as_ref(),
                    )
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let window = metrics::default_window(config.horizon);
        let summary = metrics::aggregate(&traces, Some(window))?;
        runs.push(VariantRun {
            variant,
            traces,
            summary,
        });
    }
    Ok(ExperimentResults { network, runs })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn write_mse<W: Write>(out: W, runs: &[VariantRun]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MSE_HEADER)?;
    for run in runs {
        let s = &run.summary;
        for t in 0..s.mse_avg_mean.len() {
            w.serialize((
                run.variant.as_str(),
                t,
                s.mse_avg_mean[t],
                s.mse_max_mean[t],
                s.mse_avg_stderr[t],
                s.mse_max_stderr[t],
            ))?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_concentration<W: Write>(out: W, runs: &[VariantRun]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONCENTRATION_HEADER)?;
    for run in runs {
        for (trial, trace) in run.traces.iter().enumerate() {
            for agent in 0..trace.n_agents() {
                for (t, row) in trace.log_belief_at_target.iter().enumerate() {
                    w.serialize((run.variant.as_str(), trial, agent, t, row[agent]))?;
                }
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, runs: &[VariantRun]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for run in runs {
        let s = &run.summary;
        for agent in 0..s.epsilon_mean.len() {
            // Per-trial networks may assign different errors to an agent.
            let capacity = channel::capacity(s.epsilon_mean[agent]).unwrap_or(f64::NAN);
            w.serialize((
                run.variant.as_str(),
                agent,
                s.epsilon_mean[agent],
                s.centrality_mean[agent],
                capacity,
                s.rate_bound_mean,
                s.slope_mean[agent],
                s.slope_stderr[agent],
            ))?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_outputs(dir: &Path, results: &ExperimentResults) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let net = &results.network;
    let centrality = net.stationary_distribution()?;
    let first = results.runs.first().and_then(|r| r.traces.first());
    let epsilons = match first {
        Some(trace) => trace.epsilons.clone(),
        None => vec![f64::NAN; net.n_agents()],
    };
    let path = dir.join("network.edges");
    let mut f = create(&path)?;
    net.write_edge_list(&mut f).map_err(io_err(&path))?;
    f.flush().map_err(io_err(&path))?;
    let path = dir.join("nodes.csv");
    let mut f = create(&path)?;
    net.write_node_table(&mut f, &epsilons, &centrality)
        .map_err(io_err(&path))?;
    f.flush().map_err(io_err(&path))?;

    write_mse(create(&dir.join("mse.csv"))?, &results.runs)?;
    write_concentration(create(&dir.join("concentration.csv"))?, &results.runs)?;
    write_summary(create(&dir.join("summary.csv"))?, &results.runs)?;
    Ok(())
}

/// Validates, runs and writes every output file.
pub fn run(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentResults> {
    let results = run_experiment(config, threads)?;
    write_outputs(&config.output_dir, &results)?;
    Ok(results)
}

/// `K` for the network the experiment used, straight from the network.
pub fn network_rate_bound(config: &ExperimentConfig, net: &SocialNetwork) -> Result<f64> {
    let v = net.stationary_distribution()?;
    let eps = network::assign_errors_by_centrality(&v, config.low_eps, config.high_eps, config.n_low);
    Ok(network::rate_bound(&v, &eps)?)
}
