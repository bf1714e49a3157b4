//! Experiment configuration: defaults, `key = value` files, overrides and
//! validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::engine::AlgorithmVariant;
use crate::network::{self, WeightRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NetworkMode {
    /// One network shared by every trial.
    #[default]
    Fixed,
    /// A fresh network per trial, drawn from the trial seed.
    PerTrial,
}

impl FromStr for NetworkMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "per-trial" => Ok(Self::PerTrial),
            other => Err(format!("unknown network mode {other:?} (fixed|per-trial)")),
        }
    }
}

impl NetworkMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::PerTrial => "per-trial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VariantSelection {
    One(AlgorithmVariant),
    /// Every variant, on shared seeds.
    #[default]
    All,
}

impl VariantSelection {
    pub fn variants(self) -> Vec<AlgorithmVariant> {
        match self {
            Self::One(v) => vec![v],
            Self::All => AlgorithmVariant::ALL.to_vec(),
        }
    }
}

impl FromStr for VariantSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            Ok(Self::All)
        } else {
            s.parse().map(Self::One)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_agents: usize,
    pub grid_size: usize,
    pub horizon: usize,
    pub n_trials: usize,
    pub radius: f64,
    pub low_eps: f64,
    pub high_eps: f64,
    pub n_low: usize,
    pub variant: VariantSelection,
    pub master_seed: u64,
    pub network_mode: NetworkMode,
    pub weight_rule: WeightRule,
    pub max_retries: usize,
    /// Fixed target for every trial instead of a uniform draw.
    pub target: Option<f64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_agents: 20,
            grid_size: crate::belief::DEFAULT_GRID_SIZE,
            horizon: 75,
            n_trials: 150,
            radius: network::DEFAULT_RADIUS,
            low_eps: 0.05,
            high_eps: 0.40,
            n_low: 2,
            variant: VariantSelection::All,
            master_seed: 1,
            network_mode: NetworkMode::Fixed,
            weight_rule: WeightRule::ClosedNeighborhood,
            max_retries: network::DEFAULT_MAX_RETRIES,
            target: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// A configuration field that is out of range or inconsistent.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

pub(crate) fn describe(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Every range or consistency violation; empty means the config is valid.
pub fn validate(config: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field: &'static str, message: String| {
        if !ok {
            out.push(Violation { field, message });
        }
    };
    let eps_ok = |e: f64| e > 0.0 && e < 0.5;

    check(config.n_agents >= 1, "n_agents", "must be at least 1".into());
    check(
        config.grid_size >= 2,
        "grid_size",
        format!("must be at least 2, got {}", config.grid_size),
    );
    check(
        config.horizon >= 3,
        "horizon",
        format!("must be at least 3 rounds for a slope fit, got {}", config.horizon),
    );
    check(config.n_trials >= 1, "n_trials", "must be at least 1".into());
    check(
        config.radius > 0.0 && config.radius <= std::f64::consts::SQRT_2,
        "radius",
        format!("must lie in (0, sqrt 2], got {}", config.radius),
    );
    check(
        eps_ok(config.low_eps),
        "low_eps",
        format!("must lie in the range (0, 0.5), got {}", config.low_eps),
    );
    check(
        eps_ok(config.high_eps),
        "high_eps",
        format!("must lie in the range (0, 0.5), got {}", config.high_eps),
    );
    check(
        config.n_low <= config.n_agents,
        "n_low",
        format!("{} exceeds n_agents = {}", config.n_low, config.n_agents),
    );
    check(config.max_retries >= 1, "max_retries", "must be at least 1".into());
    if let Some(t) = config.target {
        check(
            (0.0..=1.0).contains(&t),
            "target",
            format!("must lie in [0, 1], got {t}"),
        );
    }
    out
}

/// Partial configuration, as read from a file or from command-line flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub n_agents: Option<usize>,
    #[serde(alias = "grid")]
    pub grid_size: Option<usize>,
    pub horizon: Option<usize>,
    #[serde(alias = "trials")]
    pub n_trials: Option<usize>,
    pub radius: Option<f64>,
    pub low_eps: Option<f64>,
    pub high_eps: Option<f64>,
    pub n_low: Option<usize>,
    pub variant: Option<String>,
    #[serde(alias = "seed")]
    pub master_seed: Option<u64>,
    pub network_mode: Option<String>,
    #[serde(alias = "weights")]
    pub weight_rule: Option<String>,
    pub max_retries: Option<usize>,
    pub target: Option<f64>,
    #[serde(alias = "out")]
    pub output_dir: Option<PathBuf>,
}

impl ConfigOverrides {
    /// Parses a `key = value` file (TOML syntax; strings quoted).
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Fields set in `other` win.
    pub fn merge(self, other: ConfigOverrides) -> ConfigOverrides {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigOverrides { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            n_agents, grid_size, horizon, n_trials, radius, low_eps, high_eps, n_low, variant,
            master_seed, network_mode, weight_rule, max_retries, target, output_dir
        )
    }

    /// Applies the overrides to the defaults. When `n_low` is never given it
    /// is capped at `n_agents - 1`, so networks too small for the default
    /// keep at least one high-error agent.
    pub fn resolve(self) -> Result<ExperimentConfig, Vec<Violation>> {
        let mut c = ExperimentConfig::default();
        let mut errors = Vec::new();
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(
            n_agents, grid_size, horizon, n_trials, radius, low_eps, high_eps, master_seed,
            max_retries, output_dir
        );
        c.target = self.target;
        match self.n_low {
            Some(n) => c.n_low = n,
            None => c.n_low = c.n_low.min(c.n_agents.saturating_sub(1)),
        }
        if let Some(v) = self.variant {
            match v.parse() {
                Ok(sel) => c.variant = sel,
                Err(message) => errors.push(Violation { field: "variant", message }),
            }
        }
        if let Some(v) = self.network_mode {
            match v.parse() {
                Ok(mode) => c.network_mode = mode,
                Err(message) => errors.push(Violation { field: "network_mode", message }),
            }
        }
        if let Some(v) = self.weight_rule {
            match v.parse::<WeightRule>() {
                Ok(rule) => c.weight_rule = rule,
                Err(e) => errors.push(Violation {
                    field: "weight_rule",
                    message: e.to_string(),
                }),
            }
        }
        errors.extend(validate(&c));
        if errors.is_empty() {
            Ok(c)
        } else {
            Err(errors)
        }
    }
}
