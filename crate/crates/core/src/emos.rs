//! Local Gaussian EMOS fitted by minimum CRPS over a rolling window.
//!
//! Predictive law `N(a + b * mean, c + d * S^2)` (exchangeable members) or
//! `N(a + sum_i b_i X_i, c + d * S^2)`. The simplex search runs over
//! `(a, b, sqrt(c), sqrt(d))` so the variance coefficients stay non-negative,
//! with the ensemble mean centred on its window average to decouple `a`
//! from `b`.

use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleForecast, Members};
use crate::error::{Error, Result};
use crate::normal::{self, expected_abs};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Lower bound applied to every predictive variance (degC^2).
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Default rolling training length in days.
pub const DEFAULT_TRAINING_LENGTH: usize = 25;
/// Smallest admissible training window.
pub const MIN_TRAINING_LENGTH: usize = 5;

/// Gaussian predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPredictive {
    mean: f64,
    variance: f64,
}

impl GaussianPredictive {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::invalid("predictive mean must be finite"));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid(format!(
                "predictive variance must be positive and finite, got {variance}"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        normal::std_cdf((y - self.mean) / self.sd())
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let sd = self.sd();
        normal::std_pdf((y - self.mean) / sd) / sd
    }
}

/// Ensemble mean and unbiased variance (divisor `m - 1`).
pub fn ensemble_stats(ensemble: &impl Members) -> (f64, f64) {
    let x = ensemble.members();
    let m = x.len() as f64;
    let mean = x.iter().sum::<f64>() / m;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var)
}

/// CRPS of a Gaussian forecast, the one-component case of the mixture
/// formula: `A(y - mu, s^2) - A(0, 2 s^2) / 2`.
pub fn gaussian_crps(dist: &GaussianPredictive, y_obs: f64) -> f64 {
    crps_from_variance(dist.mean, dist.variance, y_obs)
}

#[inline]
fn crps_from_variance(mean: f64, variance: f64, y_obs: f64) -> f64 {
    expected_abs(y_obs - mean, variance) - 0.5 * expected_abs(0.0, variance + variance)
}

/// Mean regression weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberWeights {
    /// Single weight on the ensemble mean.
    Exchangeable(f64),
    /// One weight per member.
    PerMember(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmosParams {
    pub intercept: f64,
    pub weights: MemberWeights,
    pub var_intercept: f64,
    pub var_slope: f64,
}

impl EmosParams {
    pub fn exchangeable(intercept: f64, weight: f64, var_intercept: f64, var_slope: f64) -> Result<Self> {
        Self::new(intercept, MemberWeights::Exchangeable(weight), var_intercept, var_slope)
    }

    pub fn new(
        intercept: f64,
        weights: MemberWeights,
        var_intercept: f64,
        var_slope: f64,
    ) -> Result<Self> {
        let finite_weights = match &weights {
            MemberWeights::Exchangeable(b) => b.is_finite(),
            MemberWeights::PerMember(b) => b.iter().all(|v| v.is_finite()),
        };
        if !intercept.is_finite() || !finite_weights {
            return Err(Error::invalid("EMOS mean coefficients must be finite"));
        }
        if !(var_intercept >= 0.0 && var_slope >= 0.0)
            || !var_intercept.is_finite()
            || !var_slope.is_finite()
        {
            return Err(Error::invalid(format!(
                "EMOS variance coefficients must be finite and non-negative, got c={var_intercept}, d={var_slope}"
            )));
        }
        Ok(Self {
            intercept,
            weights,
            var_intercept,
            var_slope,
        })
    }
}

/// Predictive distribution for one ensemble.
pub fn emos_predict(params: &EmosParams, ensemble: &EnsembleForecast) -> Result<GaussianPredictive> {
    let (xbar, s2) = ensemble_stats(ensemble);
    let location = match &params.weights {
        MemberWeights::Exchangeable(b) => params.intercept + b * xbar,
        MemberWeights::PerMember(b) => {
            if b.len() != ensemble.member_count() {
                return Err(Error::invalid(format!(
                    "{} member weights for an ensemble of {} members",
                    b.len(),
                    ensemble.member_count()
                )));
            }
            params.intercept
                + b.iter()
                    .zip(ensemble.members())
                    .map(|(w, x)| w * x)
                    .sum::<f64>()
        }
    };
    let variance = (params.var_intercept + params.var_slope * s2).max(VARIANCE_FLOOR);
    GaussianPredictive::new(location, variance)
}

/// Mean CRPS of `params` over a training window.
pub fn emos_objective(
    params: &EmosParams,
    forecasts: &[EnsembleForecast],
    observations: &[f64],
) -> Result<f64> {
    check_window(forecasts, observations)?;
    let mut total = 0.0;
    for (f, y) in forecasts.iter().zip(observations) {
        total += gaussian_crps(&emos_predict(params, f)?, *y);
    }
    Ok(total / forecasts.len() as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct EmosOptions {
    /// Single shared member weight (the default for exchangeable ensembles).
    pub exchangeable: bool,
    /// Overrides the default `500 * dim` budget and 1e-8 tolerance.
    pub optimizer: Option<NelderMeadOptions>,
}

impl Default for EmosOptions {
    fn default() -> Self {
        Self {
            exchangeable: true,
            optimizer: None,
        }
    }
}

fn check_window(forecasts: &[EnsembleForecast], observations: &[f64]) -> Result<()> {
    if forecasts.len() != observations.len() {
        return Err(Error::invalid(format!(
            "{} forecasts but {} observations",
            forecasts.len(),
            observations.len()
        )));
    }
    if forecasts.is_empty() {
        return Err(Error::invalid("empty EMOS window"));
    }
    let m = forecasts[0].member_count();
    if forecasts.iter().any(|f| f.member_count() != m) {
        return Err(Error::invalid("member count varies inside the EMOS window"));
    }
    Ok(())
}

/// Training case reduced to what the objective needs.
struct Case {
    /// Centred predictors: the ensemble mean, or every member.
    predictors: Vec<f64>,
    s2: f64,
    y: f64,
}

/// Minimum-CRPS estimation of the EMOS coefficients over a training window.
///
/// Starts from `a = 0`, `b = 1` (or `1/m` per member), `c` = sample variance
/// of the ensemble-mean errors and `d = 1`. When every training ensemble has
/// zero spread, `d` is frozen at zero.
pub fn fit_emos(
    forecasts: &[EnsembleForecast],
    observations: &[f64],
    options: &EmosOptions,
) -> Result<EmosParams> {
    check_window(forecasts, observations)?;
    let n = forecasts.len();
    if n < MIN_TRAINING_LENGTH {
        return Err(Error::invalid(format!(
            "EMOS window needs at least {MIN_TRAINING_LENGTH} cases, got {n}"
        )));
    }
    let m = forecasts[0].member_count();
    let width = if options.exchangeable { 1 } else { m };

    let stats: Vec<(f64, f64)> = forecasts.iter().map(ensemble_stats).collect();
    let raw: Vec<Vec<f64>> = if options.exchangeable {
        stats.iter().map(|(xbar, _)| vec![*xbar]).collect()
    } else {
        forecasts.iter().map(|f| f.members().to_vec()).collect()
    };
    let centers: Vec<f64> = (0..width)
        .map(|j| raw.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let cases: Vec<Case> = raw
        .iter()
        .zip(&stats)
        .zip(observations)
        .map(|((r, (_, s2)), y)| Case {
            predictors: r.iter().zip(&centers).map(|(x, c)| x - c).collect(),
            s2: *s2,
            y: *y,
        })
        .collect();
    let spread_free = stats.iter().all(|(_, s2)| *s2 == 0.0);

    let errors: Vec<f64> = stats.iter().zip(observations).map(|((xbar, _), y)| y - xbar).collect();
    let err_mean = errors.iter().sum::<f64>() / n as f64;
    let c0 = errors.iter().map(|e| (e - err_mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);

    let b0 = 1.0 / width as f64;
    // centred intercept: a + sum_j b_j * center_j with a = 0
    let a0: f64 = centers.iter().map(|c| b0 * c).sum();
    let mut x0 = vec![a0];
    x0.extend(std::iter::repeat_n(b0, width));
    x0.push(c0.sqrt());
    let mut steps = vec![c0.sqrt().max(0.5)];
    steps.extend(std::iter::repeat_n(0.1_f64.min(b0 * 0.5).max(1e-3), width));
    steps.push(0.5 * c0.sqrt() + 0.1);
    if !spread_free {
        x0.push(1.0);
        steps.push(0.3);
    }

    let objective = |theta: &[f64]| -> f64 {
        let a = theta[0];
        let b = &theta[1..=width];
        let c = theta[width + 1] * theta[width + 1];
        let d = if spread_free {
            0.0
        } else {
            theta[width + 2] * theta[width + 2]
        };
        let mut total = 0.0;
        for case in &cases {
            let mu = a + b.iter().zip(&case.predictors).map(|(w, x)| w * x).sum::<f64>();
            let var = (c + d * case.s2).max(VARIANCE_FLOOR);
            total += crps_from_variance(mu, var, case.y);
        }
        total / n as f64
    };

    let nm = options
        .optimizer
        .unwrap_or_else(|| NelderMeadOptions::for_dimension(x0.len()));
    let theta = match nelder_mead(objective, &x0, &steps, nm) {
        Ok(min) => min.x,
        Err(Error::NonConvergence {
            last,
            objective,
            evaluations,
        }) => {
            return Err(Error::NonConvergence {
                last: unpack(&last, &centers, width, spread_free),
                objective,
                evaluations,
            })
        }
        Err(e) => return Err(e),
    };
    let natural = unpack(&theta, &centers, width, spread_free);
    let weights = if options.exchangeable {
        MemberWeights::Exchangeable(natural[1])
    } else {
        MemberWeights::PerMember(natural[1..=width].to_vec())
    };
    EmosParams::new(natural[0], weights, natural[width + 1], natural[width + 2])
}

/// Maps optimizer coordinates back to `(a, b..., c, d)`.
fn unpack(theta: &[f64], centers: &[f64], width: usize, spread_free: bool) -> Vec<f64> {
    let b = &theta[1..=width];
    let a = theta[0] - b.iter().zip(centers).map(|(w, c)| w * c).sum::<f64>();
    let c = theta[width + 1] * theta[width + 1];
    let d = if spread_free {
        0.0
    } else {
        theta[width + 2] * theta[width + 2]
    };
    let mut out = vec![a];
    out.extend_from_slice(b);
    out.push(c);
    out.push(d);
    out
}
