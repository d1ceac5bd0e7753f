//! AR-EMOS predictive distribution and the spread-adjusted linear pool (SLP)
//! of Gaussian components.
//!
//! For components `N(mu_l, sigma_l^2)` with weights `w_l` and a common spread
//! `c > 0` the pooled CDF is `F(y) = sum_l w_l Phi((y - mu_l) / (c sigma_l))`.
//! Moments, the Dawid-Sebastiani score and the CRPS all have closed forms;
//! the CRPS uses `A(mu, s^2) = E|N(mu, s^2)|`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artime;
use crate::emos::{GaussianPredictive, VARIANCE_FLOOR};
use crate::ensemble::{summarize, ArModifiedEnsemble, SummaryKind};
use crate::error::{Error, Result};
use crate::normal::{self, expected_abs};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// AR-EMOS: mean of the AR-modified ensemble, variance the average of the
/// per-member truncated AR process variances.
pub fn ar_emos_predict(modified: &ArModifiedEnsemble, psi_count: usize) -> Result<GaussianPredictive> {
    let models = modified.member_models();
    if models.is_empty() {
        return Err(Error::invalid("modified ensemble carries no member models"));
    }
    let variance = models
        .iter()
        .map(|m| artime::process_variance(m, psi_count))
        .sum::<f64>()
        / models.len() as f64;
    GaussianPredictive::new(summarize(modified, SummaryKind::Mean), variance.max(VARIANCE_FLOOR))
}

/// One Gaussian component of a pool. The variance is stored so that a
/// component built from a [`GaussianPredictive`] reproduces it bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    weight: f64,
    mean: f64,
    variance: f64,
}

impl Component {
    pub fn new(weight: f64, mean: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("component scale must be positive, got {scale}")));
        }
        Self::with_variance(weight, mean, scale * scale)
    }

    pub fn from_gaussian(weight: f64, dist: &GaussianPredictive) -> Result<Self> {
        Self::with_variance(weight, dist.mean(), dist.variance())
    }

    fn with_variance(weight: f64, mean: f64, variance: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::invalid(format!("component weight must lie in [0, 1], got {weight}")));
        }
        if !mean.is_finite() || !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid("component mean must be finite and variance positive"));
        }
        Ok(Self {
            weight,
            mean,
            variance,
        })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Mean, which is also the median for a Gaussian component.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn scale(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Spread-adjusted linear pool of Gaussian components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlpMixture {
    components: Vec<Component>,
    spread: f64,
}

impl SlpMixture {
    pub fn new(components: Vec<Component>, spread: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        if !(spread > 0.0 && spread.is_finite()) {
            return Err(Error::invalid(format!("spread parameter must be positive, got {spread}")));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::invalid(format!("component weights sum to {total}, not 1")));
        }
        Ok(Self { components, spread })
    }

    /// Two-component pool `w1 * first + (1 - w1) * second`.
    pub fn pair(
        first: &GaussianPredictive,
        second: &GaussianPredictive,
        w1: f64,
        spread: f64,
    ) -> Result<Self> {
        Self::new(
            vec![
                Component::from_gaussian(w1, first)?,
                Component::from_gaussian(1.0 - w1, second)?,
            ],
            spread,
        )
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    fn spread_sq(&self) -> f64 {
        self.spread * self.spread
    }

    /// Pooled CDF.
    pub fn cdf(&self, y: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * normal::std_cdf((y - c.mean) / (c.scale() * self.spread)))
            .sum()
    }

    /// Pooled density.
    pub fn pdf(&self, y: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let s = c.scale() * self.spread;
                c.weight * normal::std_pdf((y - c.mean) / s) / s
            })
            .sum()
    }

    /// Draws one value: a component by weight, then a Gaussian with scale
    /// `sigma_l * c`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = &self.components[self.components.len() - 1];
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        chosen.mean + chosen.scale() * self.spread * z
    }
}

/// Evaluates the pooled CDF; alias kept for symmetry with the other scores.
pub fn slp_cdf(mix: &SlpMixture, y: f64) -> f64 {
    mix.cdf(y)
}

/// Mean and variance of the pool,
/// `sigma_F^2 = sum_l w_l (mu_l^2 + c^2 sigma_l^2) - mu_F^2`, evaluated in
/// the equivalent cancellation-free form
/// `sum_l w_l c^2 sigma_l^2 + sum_l w_l (mu_l - mu_F)^2`.
pub fn slp_moments(mix: &SlpMixture) -> (f64, f64) {
    let mean: f64 = mix.components.iter().map(|c| c.weight * c.mean).sum();
    let c2 = mix.spread_sq();
    let within: f64 = mix.components.iter().map(|c| c.weight * (c2 * c.variance)).sum();
    let between: f64 = mix
        .components
        .iter()
        .map(|c| c.weight * (c.mean - mean) * (c.mean - mean))
        .sum();
    (mean, within + between)
}

/// Dawid-Sebastiani score `(y - mu)^2 / s^2 + 2 ln s` for a forecast with the
/// given first two moments.
pub fn dawid_sebastiani(mean: f64, variance: f64, y_obs: f64) -> f64 {
    (y_obs - mean).powi(2) / variance + variance.ln()
}

pub fn dss(mix: &SlpMixture, y_obs: f64) -> f64 {
    let (mean, variance) = slp_moments(mix);
    dawid_sebastiani(mean, variance, y_obs)
}

/// Closed-form CRPS of the pool.
pub fn slp_crps(mix: &SlpMixture, y_obs: f64) -> f64 {
    let c2 = mix.spread_sq();
    let comps = &mix.components;
    let first: f64 = comps
        .iter()
        .map(|c| c.weight * expected_abs(y_obs - c.mean, c2 * c.variance))
        .sum();
    let mut second = 0.0;
    for l in comps {
        for k in comps {
            second += l.weight * k.weight * expected_abs(l.mean - k.mean, c2 * (l.variance + k.variance));
        }
    }
    first - 0.5 * second
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Crps,
    Dss,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "crps" => Ok(Objective::Crps),
            "dss" => Ok(Objective::Dss),
            other => Err(Error::Config(format!("unknown objective '{other}'"))),
        }
    }
}

/// Candidate weights on the first component and candidate spreads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlpSearchGrid {
    pub weight_values: Vec<f64>,
    pub spread_values: Vec<f64>,
    pub objective: Objective,
}

impl Default for SlpSearchGrid {
    /// `w1 in {0.0, 0.1, ..., 1.0}`, `c in {0.6, 0.7, ..., 1.4}`: 99 cells.
    fn default() -> Self {
        Self {
            weight_values: (0..=10).map(|i| i as f64 / 10.0).collect(),
            spread_values: (6..=14).map(|i| i as f64 / 10.0).collect(),
            objective: Objective::Crps,
        }
    }
}

impl SlpSearchGrid {
    pub fn validate(&self) -> Result<()> {
        if self.weight_values.is_empty() || self.spread_values.is_empty() {
            return Err(Error::invalid("SLP search grid is empty"));
        }
        if self.weight_values.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::invalid("SLP grid weights must lie in [0, 1]"));
        }
        if self.spread_values.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("SLP grid spreads must be positive"));
        }
        Ok(())
    }

    /// Cells in row-major order: weight outer, spread inner.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.weight_values
            .iter()
            .flat_map(|w| self.spread_values.iter().map(move |c| (*w, *c)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub weight: f64,
    pub spread: f64,
    pub crps: f64,
    pub dss: f64,
}

impl GridCell {
    pub fn score(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Crps => self.crps,
            Objective::Dss => self.dss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: GridCell,
    pub objective: Objective,
    pub table: Vec<GridCell>,
}

/// Mean CRPS and DSS of the pool `(w1, c)` over all cases.
pub fn evaluate_cell(
    components: &[(GaussianPredictive, GaussianPredictive)],
    observations: &[f64],
    weight: f64,
    spread: f64,
) -> Result<GridCell> {
    let mut crps = 0.0;
    let mut dss_total = 0.0;
    for ((first, second), y) in components.iter().zip(observations) {
        let mix = SlpMixture::pair(first, second, weight, spread)?;
        crps += slp_crps(&mix, *y);
        dss_total += dss(&mix, *y);
    }
    let n = components.len() as f64;
    Ok(GridCell {
        weight,
        spread,
        crps: crps / n,
        dss: dss_total / n,
    })
}

/// Picks the cell with the smallest score; near-ties (relative 1e-12) go to
/// the weight closest to 0.5, then the spread closest to 1.
pub fn select_cell(table: &[GridCell], objective: Objective) -> Option<GridCell> {
    let min = table
        .iter()
        .map(|c| c.score(objective))
        .fold(f64::INFINITY, f64::min);
    let tolerance = 1e-12 * min.abs().max(1e-300);
    table
        .iter()
        .filter(|c| c.score(objective) - min <= tolerance)
        .min_by(|a, b| {
            let key = |c: &GridCell| ((c.weight - 0.5).abs(), (c.spread - 1.0).abs());
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
        })
        .copied()
}

/// Evaluates every `(w1, c)` cell of `grid` over all cases and returns the
/// full table with its minimizing cell. Component 1 receives weight `w1`.
pub fn grid_search_slp(
    components: &[(GaussianPredictive, GaussianPredictive)],
    observations: &[f64],
    grid: &SlpSearchGrid,
) -> Result<GridSearchResult> {
    if components.is_empty() || components.len() != observations.len() {
        return Err(Error::invalid(format!(
            "grid search needs aligned non-empty inputs, got {} forecasts and {} observations",
            components.len(),
            observations.len()
        )));
    }
    grid.validate()?;
    let table = grid
        .cells()
        .into_par_iter()
        .map(|(w, c)| evaluate_cell(components, observations, w, c))
        .collect::<Result<Vec<_>>>()?;
    let best = select_cell(&table, grid.objective)
        .ok_or_else(|| Error::invalid("grid search produced no finite score"))?;
    Ok(GridSearchResult {
        best,
        objective: grid.objective,
        table,
    })
}
