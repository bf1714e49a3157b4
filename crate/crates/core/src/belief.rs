//! Per-agent posterior densities over the unit interval.
//!
//! A [`BeliefDensity`] is piecewise constant on a uniform grid of `M` cells and
//! is stored as `log2` of the density in each cell. Every public operation
//! returns a normalized belief whose cells are clamped at [`LOG_FLOOR`], so the
//! CDF is strictly increasing and the median is unique.

use thiserror::Error;

/// Default number of grid cells.
pub const DEFAULT_GRID_SIZE: usize = 4096;

/// Lowest admissible `log2` density of any cell.
pub const LOG_FLOOR: f64 = -60.0;

/// Allowed deviation of the Bayes-update integral from one. Querying at the
/// exact median makes the update self-normalizing.
pub const MEDIAN_INTEGRAL_TOL: f64 = 1e-6;

/// Allowed deviation of a weight row from summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("grid size must be at least 2, got {0}")]
    GridTooSmall(usize),
    #[error("error probability must lie in (0, 0.5), got {0}")]
    EpsilonOutOfRange(f64),
    #[error("point {0} lies outside [0, 1]")]
    OutOfDomain(f64),
    #[error("grid sizes differ: expected {expected}, found {found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("invalid weight row: {0}")]
    InvalidWeights(String),
    #[error("log density contains NaN or +inf")]
    NonFiniteDensity,
    #[error("no beliefs to combine")]
    Empty,
    #[error("query is not the median: update integral {integral} differs from 1")]
    NotMedian { integral: f64 },
}

pub type Result<T> = std::result::Result<T, BeliefError>;

/// Boundary `x_hat` of the queried interval `[0, x_hat]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QueryPoint(f64);

impl QueryPoint {
    pub fn new(x_hat: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&x_hat) {
            Ok(Self(x_hat))
        } else {
            Err(BeliefError::OutOfDomain(x_hat))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A normalized belief together with the `log2` of the integral that was
/// divided out to normalize it.
#[derive(Debug, Clone, PartialEq)]
pub struct Renormalized {
    pub belief: BeliefDensity,
    pub log2_integral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefDensity {
    log_density: Vec<f64>,
    /// `2^log_density`, kept alongside so bisection and the Bayes update
    /// need no exponentials.
    density: Vec<f64>,
}

impl BeliefDensity {
    /// Density one everywhere.
    pub fn uniform(grid_size: usize) -> Result<Self> {
        if grid_size < 2 {
            return Err(BeliefError::GridTooSmall(grid_size));
        }
        Ok(Self {
            log_density: vec![0.0; grid_size],
            density: vec![1.0; grid_size],
        })
    }

    /// Builds a belief from unnormalized `log2` cell densities. `-inf` entries
    /// are allowed and end up at the floor.
    pub fn from_log_density(log_density: Vec<f64>) -> Result<Self> {
        Ok(Self::renormalize(log_density)?.belief)
    }

    /// Builds a belief from unnormalized, nonnegative linear cell densities.
    pub fn from_density(density: &[f64]) -> Result<Self> {
        if density.iter().any(|d| d.is_nan() || *d < 0.0) {
            return Err(BeliefError::NonFiniteDensity);
        }
        Self::from_log_density(density.iter().map(|d| d.log2()).collect())
    }

    fn renormalize(mut log_density: Vec<f64>) -> Result<Renormalized> {
        let grid_size = log_density.len();
        if grid_size < 2 {
            return Err(BeliefError::GridTooSmall(grid_size));
        }
        if log_density
            .iter()
            .any(|v| v.is_nan() || *v == f64::INFINITY)
        {
            return Err(BeliefError::NonFiniteDensity);
        }
        let max = log_density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            // Zero everywhere: fall back to the uniform density.
            return Ok(Renormalized {
                belief: Self::uniform(grid_size)?,
                log2_integral: f64::NEG_INFINITY,
            });
        }
        // Shifted so the largest cell is 1 before exponentiating.
        let mut density: Vec<f64> = log_density.iter().map(|v| (v - max).exp2()).collect();
        let scaled: f64 = density.iter().sum();
        let log2_integral = max + scaled.log2() - (grid_size as f64).log2();
        let scale = grid_size as f64 / scaled;
        for (v, d) in log_density.iter_mut().zip(&mut density) {
            *v -= log2_integral;
            *d *= scale;
        }
        let mut belief = Self {
            log_density,
            density,
        };
        belief.apply_floor();
        Ok(Renormalized {
            belief,
            log2_integral,
        })
    }

    fn apply_floor(&mut self) {
        let floor = LOG_FLOOR.exp2();
        for (v, d) in self.log_density.iter_mut().zip(&mut self.density) {
            if *v < LOG_FLOOR {
                *v = LOG_FLOOR;
                *d = floor;
            }
        }
    }

    pub fn grid_size(&self) -> usize {
        self.log_density.len()
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.grid_size() as f64
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    /// Linear-domain density of every cell.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Probability mass of every cell.
    pub fn cell_masses(&self) -> Vec<f64> {
        let w = self.cell_width();
        self.density.iter().map(|d| d * w).collect()
    }

    /// Integral of the density over `[0, 1]`.
    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell_width()
    }

    /// Index of the cell containing `x`; cells are left-closed except the
    /// last, which also owns `x = 1`.
    pub fn cell_index(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(BeliefError::OutOfDomain(x));
        }
        let m = self.grid_size();
        Ok(((x * m as f64) as usize).min(m - 1))
    }

    pub fn log_density_at(&self, x: f64) -> Result<f64> {
        Ok(self.log_density[self.cell_index(x)?])
    }

    pub fn density_at(&self, x: f64) -> Result<f64> {
        Ok(self.density[self.cell_index(x)?])
    }

    /// `F(x)`, exact for a piecewise-constant density.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let k = self.cell_index(x)?;
        let below: f64 = self.density[..k].iter().sum();
        let frac = (x * self.grid_size() as f64 - k as f64).clamp(0.0, 1.0);
        Ok((below + frac * self.density[k]) * self.cell_width())
    }

    /// The median `F^{-1}(1/2)`, interpolated linearly inside the cell where
    /// the cumulative mass crosses one half.
    pub fn bisect(&self) -> QueryPoint {
        // Work in units of density; the cell width cancels.
        let half = 0.5 * self.density.iter().sum::<f64>();
        let m = self.grid_size() as f64;
        let mut cumulative = 0.0;
        for (k, &d) in self.density.iter().enumerate() {
            if cumulative + d >= half {
                let frac = ((half - cumulative) / d).clamp(0.0, 1.0);
                return QueryPoint(((k as f64 + frac) / m).clamp(0.0, 1.0));
            }
            cumulative += d;
        }
        QueryPoint(1.0)
    }

    /// Per-cell fraction of the cell lying inside `[0, x_hat]`.
    fn inside_fraction(&self, k: usize, x_hat: f64) -> f64 {
        (x_hat * self.grid_size() as f64 - k as f64).clamp(0.0, 1.0)
    }

    /// `∫ p(x) l(x, y) dx` for the observation likelihood `l`, without the
    /// factor two. Equals one half when `query` is the median.
    pub fn likelihood_mass(&self, query: QueryPoint, response: bool, epsilon: f64) -> Result<f64> {
        check_epsilon(epsilon)?;
        let (inside, outside) = likelihood(response, epsilon);
        Ok(self
            .cell_masses()
            .iter()
            .enumerate()
            .map(|(k, mass)| {
                let f = self.inside_fraction(k, query.value());
                mass * (f * inside + (1.0 - f) * outside)
            })
            .sum())
    }

    /// Multiplies the density by `2 l(x, y)`: `2(1 - eps)` on the side the
    /// response points to and `2 eps` on the other. The cell containing the
    /// query point gets the mass-weighted mixture of both factors.
    ///
    /// Fails with [`BeliefError::NotMedian`] when the updated integral is not
    /// one, which happens iff `query` is not the median of `self`.
    pub fn bayes_update(
        &self,
        query: QueryPoint,
        response: bool,
        epsilon: f64,
    ) -> Result<Renormalized> {
        check_epsilon(epsilon)?;
        let (inside, outside) = likelihood(response, epsilon);
        let (factor_in, factor_out) = (2.0 * inside, 2.0 * outside);
        let (log_in, log_out) = (factor_in.log2(), factor_out.log2());
        let m = self.grid_size();
        // Cells below `split` lie inside [0, x_hat]; `split` itself may
        // straddle the query point.
        let position = query.value() * m as f64;
        let split = (position as usize).min(m);
        let frac = position - split as f64;

        let mut log_density = Vec::with_capacity(m);
        let mut density = Vec::with_capacity(m);
        for k in 0..m {
            let (log_factor, factor) = if k < split {
                (log_in, factor_in)
            } else if k > split || frac <= 0.0 {
                (log_out, factor_out)
            } else {
                let f = frac * factor_in + (1.0 - frac) * factor_out;
                (f.log2(), f)
            };
            log_density.push(self.log_density[k] + log_factor);
            density.push(self.density[k] * factor);
        }
        let integral = density.iter().sum::<f64>() / m as f64;
        if (integral - 1.0).abs() > MEDIAN_INTEGRAL_TOL {
            return Err(BeliefError::NotMedian { integral });
        }
        let log2_integral = integral.log2();
        for (v, d) in log_density.iter_mut().zip(&mut density) {
            *v -= log2_integral;
            *d /= integral;
        }
        let mut belief = Self {
            log_density,
            density,
        };
        belief.apply_floor();
        Ok(Renormalized {
            belief,
            log2_integral,
        })
    }
}

/// Likelihood of the response for points inside and outside `[0, x_hat]`.
pub fn likelihood(response: bool, epsilon: f64) -> (f64, f64) {
    let inside = if response { 1.0 - epsilon } else { epsilon };
    (inside, 1.0 - inside)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(BeliefError::EpsilonOutOfRange(epsilon))
    }
}

fn check_combination(beliefs: &[BeliefDensity], weights: &[f64]) -> Result<usize> {
    let first = beliefs.first().ok_or(BeliefError::Empty)?;
    if weights.len() != beliefs.len() {
        return Err(BeliefError::InvalidWeights(format!(
            "{} weights for {} beliefs",
            weights.len(),
            beliefs.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(BeliefError::InvalidWeights(format!("negative or non-finite weight {w}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(BeliefError::InvalidWeights(format!("weights sum to {sum}")));
    }
    let grid_size = first.grid_size();
    if let Some(b) = beliefs.iter().find(|b| b.grid_size() != grid_size) {
        return Err(BeliefError::GridMismatch {
            expected: grid_size,
            found: b.grid_size(),
        });
    }
    Ok(grid_size)
}

/// Weighted geometric mean of densities (arithmetic mean of log-densities),
/// renormalized. `log2_integral` is the normalizer removed, which Jensen's
/// inequality keeps at or below zero.
///
/// A row putting all weight on one belief returns that belief bit for bit.
pub fn geometric_average(beliefs: &[BeliefDensity], weights: &[f64]) -> Result<Renormalized> {
    let grid_size = check_combination(beliefs, weights)?;
    if let Some(j) = weights.iter().position(|&w| w == 1.0) {
        return Ok(Renormalized {
            belief: beliefs[j].clone(),
            log2_integral: 0.0,
        });
    }
    let mut combined = vec![0.0; grid_size];
    for (belief, &w) in beliefs.iter().zip(weights).filter(|(_, &w)| w > 0.0) {
        for (acc, ld) in combined.iter_mut().zip(&belief.log_density) {
            *acc += w * ld;
        }
    }
    BeliefDensity::renormalize(combined)
}

/// Weighted arithmetic mixture of densities, renormalized.
///
/// A row putting all weight on one belief returns that belief bit for bit.
pub fn arithmetic_mixture(beliefs: &[BeliefDensity], weights: &[f64]) -> Result<Renormalized> {
    let grid_size = check_combination(beliefs, weights)?;
    if let Some(j) = weights.iter().position(|&w| w == 1.0) {
        return Ok(Renormalized {
            belief: beliefs[j].clone(),
            log2_integral: 0.0,
        });
    }
    let mut mixed = vec![0.0; grid_size];
    for (belief, &w) in beliefs.iter().zip(weights).filter(|(_, &w)| w > 0.0) {
        for (acc, d) in mixed.iter_mut().zip(&belief.density) {
            *acc += w * d;
        }
    }
    let mixed = mixed.into_iter().map(f64::log2).collect();
    BeliefDensity::renormalize(mixed)
}
