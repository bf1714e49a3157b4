//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.
//!
//! ```bash
//! cargo test --test acceptance
//! ```

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use social_bisection::belief::BeliefDensity;
use social_bisection::channel::{self, ResponseOracle};
use social_bisection::config::{ExperimentConfig, VariantSelection};
use social_bisection::engine::{AlgorithmVariant, SimulationState};
use social_bisection::network::{self, WeightRule};
use social_bisection::runner;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

/// 1. Single agent without collaboration learns at rate C(0.4).
fn no_collaboration_rate() -> Outcome {
    let config = ExperimentConfig {
        n_agents: 1,
        n_low: 0,
        high_eps: 0.40,
        horizon: 2000,
        n_trials: 20,
        grid_size: 4096,
        variant: VariantSelection::One(AlgorithmVariant::NoCollaboration),
        ..Default::default()
    };
    let start = Instant::now();
    let results = runner::run_experiment(&config, None).expect("experiment runs");
    let elapsed = start.elapsed();
    let slope = results.runs[0].summary.slope_mean[0];
    let capacity = channel::capacity(0.40).unwrap();
    let ok = (slope - capacity).abs() <= 0.005 && (capacity - 0.0290).abs() < 5e-5;
    outcome(
        ok && within(elapsed, 10),
        format!("mean slope {slope:.5} vs C(0.4) = {capacity:.5} +- 0.005, {elapsed:.2?} (< 10 s)"),
    )
}

/// 2. Every agent's mean concentration slope clears K - 0.02.
fn rate_bound_floor() -> Outcome {
    let config = ExperimentConfig {
        n_trials: 50,
        horizon: 300,
        variant: VariantSelection::One(AlgorithmVariant::SocialLearning),
        ..Default::default()
    };
    let start = Instant::now();
    let results = runner::run_experiment(&config, None).expect("experiment runs");
    let elapsed = start.elapsed();
    let net = &results.network;
    let v = net.stationary_distribution().unwrap();
    let eps = network::assign_errors_by_centrality(&v, 0.05, 0.40, 2);
    let k = network::rate_bound(&v, &eps).unwrap();
    let low = eps.iter().filter(|&&e| e == 0.05).count();
    let slopes = &results.runs[0].summary.slope_mean;
    let worst = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let ok = net.n_agents() == 20 && low == 2 && slopes.iter().all(|&s| s >= k - 0.02);
    outcome(
        ok && within(elapsed, 120),
        format!("K = {k:.5}, min agent slope {worst:.5} >= K - 0.02, {elapsed:.2?} (< 120 s)"),
    )
}

/// 3 and 4. Collaboration beats isolation on the default setup, and no
/// averaging normalizer is positive anywhere in the run.
fn collaboration_dominance_and_jensen() -> (Outcome, Outcome) {
    let config = ExperimentConfig::default();
    assert_eq!((config.n_trials, config.horizon), (150, 75));
    let start = Instant::now();
    let results = runner::run_experiment(&config, None).expect("experiment runs");
    let elapsed = start.elapsed();
    let find = |v| {
        &results
            .runs
            .iter()
            .find(|r| r.variant == v)
            .expect("variant ran")
            .summary
    };
    let social = find(AlgorithmVariant::SocialLearning);
    let solo = find(AlgorithmVariant::NoCollaboration);
    let avg_ok = (20..=75).all(|t| social.mse_avg_mean[t] <= solo.mse_avg_mean[t]);
    let ratio = solo.mse_max_mean[75] / social.mse_max_mean[75];
    let dominance = outcome(
        avg_ok && ratio >= 2.0 && within(elapsed, 180),
        format!(
            "MSE_avg social <= no-collab for t >= 20: {avg_ok}; MSE_max(75) ratio {ratio:.3e} >= 2; {elapsed:.2?} (< 180 s)"
        ),
    );

    let mut count = 0usize;
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for run in &results.runs {
        for trace in &run.traces {
            for &d in trace.d_terms.iter().flatten() {
                count += 1;
                worst = worst.max(d);
                if d > 1e-12 {
                    violations += 1;
                }
            }
        }
    }
    let jensen = outcome(
        violations == 0,
        format!("{violations} of {count} normalizers above 1e-12 (max {worst:.3e})"),
    );
    (dominance, jensen)
}

fn random_belief(rng: &mut ChaCha8Rng, grid: usize, spread: f64) -> BeliefDensity {
    BeliefDensity::from_log_density((0..grid).map(|_| rng.random_range(-spread..spread)).collect())
        .unwrap()
}

/// 5. Querying at the median makes the likelihood integral exactly one half.
fn median_normalizer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let grid = rng.random_range(2..=256);
        let belief = random_belief(&mut rng, grid, 12.0);
        let eps = rng.random_range(1e-4..0.5);
        let response = rng.random::<bool>();
        let x_hat = belief.bisect().value();
        // p * l integrated cell by cell, the median cell split at x_hat.
        let inside = if response { 1.0 - eps } else { eps };
        let integral: f64 = belief
            .density()
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let f = (x_hat * grid as f64 - k as f64).clamp(0.0, 1.0);
                d / grid as f64 * (f * inside + (1.0 - f) * (1.0 - inside))
            })
            .sum();
        let reported = belief
            .likelihood_mass(belief.bisect(), response, eps)
            .unwrap();
        worst = worst.max((integral - 0.5).abs()).max((reported - 0.5).abs());
    }
    outcome(worst <= 1e-6, format!("max |integral - 1/2| = {worst:.3e} over 10^4 pairs"))
}

/// Linear-domain Stage 1 + Stage 2, written out directly.
fn reference_round(
    priors: &[Vec<f64>],
    weights: &[Vec<f64>],
    eps: &[f64],
    responses: &[bool],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = priors[0].len();
    let width = 1.0 / m as f64;
    let mut medians = Vec::new();
    let mut updated = Vec::new();
    for (i, p) in priors.iter().enumerate() {
        let total: f64 = p.iter().map(|d| d * width).sum();
        let mut cumulative = 0.0;
        let mut x_hat = 1.0;
        for (k, d) in p.iter().enumerate() {
            let mass = d * width;
            if cumulative + mass >= total / 2.0 {
                x_hat = (k as f64 + (total / 2.0 - cumulative) / mass) * width;
                break;
            }
            cumulative += mass;
        }
        medians.push(x_hat);
        let f1 = if responses[i] { 1.0 - eps[i] } else { eps[i] };
        let mut q: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let frac = ((x_hat - k as f64 * width) / width).clamp(0.0, 1.0);
                d * 2.0 * (frac * f1 + (1.0 - frac) * (1.0 - f1))
            })
            .collect();
        let z: f64 = q.iter().map(|d| d * width).sum();
        q.iter_mut().for_each(|d| *d /= z);
        updated.push(q);
    }
    let averaged = weights
        .iter()
        .map(|row| {
            let mut g: Vec<f64> = (0..m)
                .map(|k| {
                    row.iter()
                        .zip(&updated)
                        .map(|(a, q)| q[k].powf(*a))
                        .product()
                })
                .collect();
            let z: f64 = g.iter().map(|d| d * width).sum();
            g.iter_mut().for_each(|d| *d /= z);
            g
        })
        .collect();
    (medians, averaged)
}

/// 6. One engine round equals the brute-force reference on small grids.
fn brute_force_round() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + s);
        let n = rng.random_range(1..=4);
        let grid = rng.random_range(2..=16);
        let net = network::random_geometric_graph(n, 0.8, &mut rng, 1000, WeightRule::default())
            .unwrap();
        let eps: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.49)).collect();
        let target = rng.random::<f64>();
        let priors: Vec<BeliefDensity> = (0..n).map(|_| random_belief(&mut rng, grid, 2.0)).collect();
        let oracle = ResponseOracle::new(target, eps.clone(), s).unwrap();
        let mut state = SimulationState::with_beliefs(net.clone(), oracle, priors.clone()).unwrap();
        let record = state.step(AlgorithmVariant::SocialLearning).unwrap();

        let linear: Vec<Vec<f64>> = priors.iter().map(|b| b.density().to_vec()).collect();
        let (medians, expected) = reference_round(&linear, net.weights(), &eps, &record.responses);
        for (a, b) in medians.iter().zip(&record.query_points) {
            worst = worst.max((a - b).abs());
        }
        for (got, want) in state.beliefs().iter().zip(&expected) {
            for (a, b) in got.density().iter().zip(want) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max per-cell deviation {worst:.3e} over 100 seeds"))
}

/// 7. Power iteration agrees with a direct null-space solve.
fn stationary_distribution_check() -> Outcome {
    let mut worst_residual: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for s in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + s);
        let n = rng.random_range(2..=25);
        let net = network::random_geometric_graph(n, 0.5, &mut rng, 10_000, WeightRule::default())
            .unwrap();
        let v = net.stationary_distribution().unwrap();
        worst_residual = worst_residual.max(v.residual(net.weights()));

        // (A^T - I) v = 0 with the last equation replaced by sum(v) = 1.
        let a = net.weights();
        let mut m = DMatrix::from_fn(n, n, |i, j| a[j][i] - if i == j { 1.0 } else { 0.0 });
        m.row_mut(n - 1).fill(1.0);
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let direct = m.lu().solve(&rhs).expect("nonsingular");
        for (x, y) in v.as_slice().iter().zip(direct.iter()) {
            worst_gap = worst_gap.max((x - y).abs());
        }
    }
    outcome(
        worst_residual <= 1e-10 && worst_gap <= 1e-8,
        format!("max ||vA - v|| = {worst_residual:.3e} (<= 1e-10), max gap to direct solve {worst_gap:.3e} (<= 1e-8)"),
    )
}

/// 8. `mse.csv` is byte-identical across runs and worker counts.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_pba"));
        cmd.args(["--trials", "12", "--horizon", "30", "--grid", "1024", "--seed", "77"])
            .arg("--out")
            .arg(&out);
        match threads {
            Some(t) => cmd.env("PBA_THREADS", t),
            None => cmd.env_remove("PBA_THREADS"),
        };
        let status = cmd.output().expect("binary runs").status;
        assert!(status.success());
        std::fs::read(out.join("mse.csv")).unwrap()
    };
    let a = run("a", Some("1"));
    let b = run("b", Some("1"));
    let c = run("c", Some("4"));
    let d = run("d", None);
    let ok = !a.is_empty() && a == b && a == c && a == d;
    outcome(ok, format!("{} bytes; identical across reruns and PBA_THREADS=1/4/unset: {ok}", a.len()))
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 no-collaboration rate", no_collaboration_rate()));
    results.push(("2 rate bound as slope floor", rate_bound_floor()));
    let (dominance, jensen) = collaboration_dominance_and_jensen();
    results.push(("3 collaboration dominance", dominance));
    results.push(("4 Jensen invariant", jensen));
    results.push(("5 median normalizer", median_normalizer()));
    results.push(("6 brute-force equivalence", brute_force_round()));
    results.push(("7 stationary distribution", stationary_distribution_check()));
    results.push(("8 determinism", determinism()));

    let mut failed = 0;
    for (name, o) in &results {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {}", o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
