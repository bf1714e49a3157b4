use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use social_bisection::config::ConfigOverrides;
use social_bisection::runner;

/// Monte Carlo runner for distributed probabilistic bisection.
///
/// Flags override values from `--config`, which override the defaults.
#[derive(Debug, Parser)]
#[command(name = "pba", version)]
struct Cli {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// social | no-collab | linear | all
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, alias = "n-trials")]
    trials: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Number of grid cells per belief.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// fixed | per-trial
    #[arg(long)]
    network_mode: Option<String>,
    #[arg(long)]
    n_agents: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    low_eps: Option<f64>,
    #[arg(long)]
    high_eps: Option<f64>,
    /// Number of low-error agents, picked by centrality.
    #[arg(long)]
    n_low: Option<usize>,
    /// Fix the target instead of drawing it per trial.
    #[arg(long)]
    target: Option<f64>,
    /// equal | metropolis
    #[arg(long)]
    weights: Option<String>,
}

impl Cli {
    fn overrides(self) -> ConfigOverrides {
        ConfigOverrides {
            n_agents: self.n_agents,
            grid_size: self.grid,
            horizon: self.horizon,
            n_trials: self.trials,
            radius: self.radius,
            low_eps: self.low_eps,
            high_eps: self.high_eps,
            n_low: self.n_low,
            variant: self.variant,
            master_seed: self.seed,
            network_mode: self.network_mode,
            weight_rule: self.weights,
            max_retries: None,
            target: self.target,
            output_dir: self.out,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let base = match &cli.config {
        Some(path) => match ConfigOverrides::from_file(path) {
            Ok(o) => o,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ConfigOverrides::default(),
    };
    let config = match base.merge(cli.overrides()).resolve() {
        Ok(c) => c,
        Err(violations) => {
            for v in violations {
                eprintln!("config error: {v}");
            }
            return ExitCode::from(2);
        }
    };

    let results = match runner::run(&config, runner::threads_from_env()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    println!(
        "{} agents, {} trials, horizon {}, outputs in {}",
        config.n_agents,
        config.n_trials,
        config.horizon,
        config.output_dir.display()
    );
    for run in &results.runs {
        let s = &run.summary;
        let last = s.mse_avg_mean.len() - 1;
        let worst_slope = s.slope_mean.iter().copied().fold(f64::INFINITY, f64::min);
        println!(
            "{:>9}: K = {:.5}  MSE_avg(T) = {:.3e}  MSE_max(T) = {:.3e}  min slope = {:.4}",
            run.variant, s.rate_bound_mean, s.mse_avg_mean[last], s.mse_max_mean[last], worst_slope
        );
    }
    ExitCode::SUCCESS
}
