//! Autoregressive models for scalar forecast-error series.
//!
//! Estimation follows the classical Yule-Walker route: biased sample
//! autocovariances (divisor `n`), a Toeplitz solve by the Levinson-Durbin
//! recursion, and order selection by the pseudo-likelihood AIC
//! `n * ln(sigma2(p)) + 2p`. The resulting models are always weakly
//! stationary because the biased autocovariance matrix is positive definite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of psi-weights used when propagating innovation variance.
pub const DEFAULT_PSI_COUNT: usize = 10;
/// Default ceiling for the AIC order search.
pub const DEFAULT_MAX_ORDER: usize = 15;

/// Ordered forecast-error values `Z(t) = Y(t) - eta(t)` with unit time spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    values: Vec<f64>,
    start_index: usize,
}

impl ErrorSeries {
    pub fn new(values: Vec<f64>, start_index: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("error series must contain at least one value"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "error series value at offset {pos} is not finite"
            )));
        }
        Ok(Self {
            values,
            start_index,
        })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// A fitted AR(p) model `Z(t) - mu = sum_j alpha_j (Z(t-j) - mu) + eps(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    mean: f64,
    coefficients: Vec<f64>,
    innovation_variance: f64,
}

impl ArModel {
    pub fn new(mean: f64, coefficients: Vec<f64>, innovation_variance: f64) -> Result<Self> {
        if !mean.is_finite() || coefficients.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("AR model parameters must be finite"));
        }
        if !(innovation_variance >= 0.0 && innovation_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "innovation variance must be finite and >= 0, got {innovation_variance}"
            )));
        }
        Ok(Self {
            mean,
            coefficients,
            innovation_variance,
        })
    }

    /// Order-zero model: a plain bias correction by `mean`.
    pub fn white_noise(mean: f64, innovation_variance: f64) -> Result<Self> {
        Self::new(mean, Vec::new(), innovation_variance)
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn innovation_variance(&self) -> f64 {
        self.innovation_variance
    }

    /// True when every root of `1 - a_1 z - ... - a_p z^p` lies strictly
    /// outside the unit circle.
    ///
    /// Uses the step-down (inverse Levinson) recursion: the polynomial is
    /// stable iff every reflection coefficient has modulus below one.
    pub fn is_stationary(&self) -> bool {
        let mut a = self.coefficients.clone();
        for k in (1..=a.len()).rev() {
            let kappa = a[k - 1];
            if kappa.abs() >= 1.0 {
                return false;
            }
            let denom = 1.0 - kappa * kappa;
            let prev: Vec<f64> = (1..k)
                .map(|j| (a[j - 1] + kappa * a[k - j - 1]) / denom)
                .collect();
            a.truncate(k - 1);
            a.copy_from_slice(&prev);
        }
        true
    }
}

/// psi_1..psi_q of the one-sided moving-average representation.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiWeights {
    weights: Vec<f64>,
}

impl PsiWeights {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Biased sample autocovariances `gamma(0..=max_lag)` (divisor `n`).
pub fn sample_autocovariance(series: &ErrorSeries, max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::EstimationImpossible(format!(
            "autocovariance needs at least 2 observations, got {n}"
        )));
    }
    if max_lag >= n {
        return Err(Error::invalid(format!(
            "max_lag {max_lag} must be smaller than the series length {n}"
        )));
    }
    Ok(autocovariance_unchecked(series.values(), max_lag))
}

fn autocovariance_unchecked(values: &[f64], max_lag: usize) -> Vec<f64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    (0..=max_lag)
        .map(|lag| {
            centered[lag..]
                .iter()
                .zip(&centered[..n - lag])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Yule-Walker coefficients for every order `1..=max_order` via Levinson-Durbin.
///
/// Entry `k - 1` holds the order-`k` solution.
fn levinson_durbin(gamma: &[f64], max_order: usize) -> Result<Vec<Vec<f64>>> {
    let mut path = Vec::with_capacity(max_order);
    let mut phi: Vec<f64> = Vec::new();
    let mut v = gamma[0];
    for k in 1..=max_order {
        if !(v > 0.0) {
            return Err(Error::DegenerateSeries(format!(
                "Yule-Walker system is singular at order {k}"
            )));
        }
        let acc: f64 = (1..k).map(|j| phi[j - 1] * gamma[k - j]).sum();
        let kappa = (gamma[k] - acc) / v;
        let mut next: Vec<f64> = (1..k).map(|j| phi[j - 1] - kappa * phi[k - j - 1]).collect();
        next.push(kappa);
        v *= 1.0 - kappa * kappa;
        phi = next;
        path.push(phi.clone());
    }
    Ok(path)
}

fn innovation_variance(gamma: &[f64], coefficients: &[f64]) -> f64 {
    gamma[0]
        - coefficients
            .iter()
            .enumerate()
            .map(|(j, a)| a * gamma[j + 1])
            .sum::<f64>()
}

fn check_nondegenerate(gamma: &[f64]) -> Result<()> {
    if !(gamma[0] > 0.0) {
        return Err(Error::DegenerateSeries(
            "series has zero sample variance".into(),
        ));
    }
    Ok(())
}

/// Fits an AR(`order`) model by Yule-Walker estimation.
///
/// The mean is the plain sample mean and the innovation variance is
/// `gamma(0) - sum_j alpha_j gamma(j)`.
pub fn fit_yule_walker(series: &ErrorSeries, order: usize) -> Result<ArModel> {
    let n = series.len();
    if n <= order + 1 {
        return Err(Error::EstimationImpossible(format!(
            "order {order} needs more than {} observations, got {n}",
            order + 1
        )));
    }
    let gamma = autocovariance_unchecked(series.values(), order);
    fit_from_autocovariance(series.mean(), &gamma, order)
}

fn fit_from_autocovariance(mean: f64, gamma: &[f64], order: usize) -> Result<ArModel> {
    check_nondegenerate(gamma)?;
    let coefficients = if order == 0 {
        Vec::new()
    } else {
        levinson_durbin(gamma, order)?.pop().unwrap_or_default()
    };
    let sigma2 = innovation_variance(gamma, &coefficients);
    // Rounding can push a near-perfect fit marginally below zero.
    let model = ArModel::new(mean, coefficients, sigma2.max(0.0))?;
    debug_assert!(model.is_stationary(), "Yule-Walker fit is not stationary");
    Ok(model)
}

/// AIC values `n * ln(sigma2(p)) + 2p` for `p = 0..=max_order`.
///
/// As in R's `ar.yw`, `sigma2(p)` is the innovation variance of the order-`p`
/// fit scaled by `n / (n - p - 1)`.
pub fn aic_path(series: &ErrorSeries, max_order: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_order + 1 >= n {
        return Err(Error::invalid(format!(
            "max_order {max_order} must be smaller than series length - 1 ({})",
            n.saturating_sub(1)
        )));
    }
    let gamma = autocovariance_unchecked(series.values(), max_order);
    aic_from_autocovariance(&gamma, n, max_order)
}

fn aic_from_autocovariance(gamma: &[f64], n: usize, max_order: usize) -> Result<Vec<f64>> {
    check_nondegenerate(gamma)?;
    let path = levinson_durbin(gamma, max_order)?;
    let nf = n as f64;
    std::iter::once(Vec::new())
        .chain(path)
        .enumerate()
        .map(|(p, coefficients)| {
            let sigma2 = innovation_variance(gamma, &coefficients);
            if !(sigma2 > 0.0) {
                return Err(Error::DegenerateSeries(format!(
                    "non-positive innovation variance at order {p}"
                )));
            }
            let corrected = sigma2 * nf / (nf - p as f64 - 1.0);
            Ok(nf * corrected.ln() + 2.0 * p as f64)
        })
        .collect()
}

/// Selects the AR order minimizing AIC over `0..=max_order`; ties go to the
/// smaller order.
pub fn select_order_aic(series: &ErrorSeries, max_order: usize) -> Result<usize> {
    let aic = aic_path(series, max_order)?;
    Ok(argmin_first(&aic))
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// AIC order selection followed by the Yule-Walker fit at the chosen order.
pub fn fit_ar_aic(series: &ErrorSeries, max_order: usize) -> Result<ArModel> {
    let n = series.len();
    if max_order + 1 >= n {
        return Err(Error::invalid(format!(
            "max_order {max_order} must be smaller than series length - 1 ({})",
            n.saturating_sub(1)
        )));
    }
    let gamma = autocovariance_unchecked(series.values(), max_order);
    let aic = aic_from_autocovariance(&gamma, n, max_order)?;
    let order = argmin_first(&aic);
    fit_from_autocovariance(series.mean(), &gamma[..=order], order)
}

/// Search ceiling for a training window of `n` values: the configured
/// maximum, capped at `n / 10` for short series.
pub fn order_ceiling(n: usize, max_order: usize) -> usize {
    max_order.min(n / 10).min(n.saturating_sub(2))
}

/// psi-weights from the AR-to-MA recursion `psi_j = sum_i alpha_i psi_{j-i}`,
/// `psi_0 = 1` (not returned).
pub fn psi_weights(model: &ArModel, count: usize) -> Result<PsiWeights> {
    if count == 0 {
        return Err(Error::invalid("psi-weight count must be at least 1"));
    }
    Ok(PsiWeights {
        weights: psi_recursion(model.coefficients(), count),
    })
}

fn psi_recursion(alpha: &[f64], count: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(count + 1);
    psi.push(1.0);
    for j in 1..=count {
        let value = (1..=j.min(alpha.len()))
            .map(|i| alpha[i - 1] * psi[j - i])
            .sum();
        psi.push(value);
    }
    psi.remove(0);
    psi
}

/// Truncated process variance `sigma2_eps * (1 + sum_{j<=count} psi_j^2)`.
pub fn process_variance(model: &ArModel, count: usize) -> f64 {
    let tail: f64 = psi_recursion(model.coefficients(), count)
        .iter()
        .map(|p| p * p)
        .sum();
    model.innovation_variance() * (1.0 + tail)
}

/// One-step AR-modified forecast
/// `eta + mu + sum_j alpha_j (Z(t-j) - mu)`.
///
/// `history` is chronological: its last element is `Z(t-1)`. Only the last
/// `p` values are used.
pub fn ar_modified_forecast(model: &ArModel, history: &[f64], eta: f64) -> Result<f64> {
    let p = model.order();
    if history.len() < p {
        return Err(Error::InsufficientHistory {
            needed: p,
            available: history.len(),
        });
    }
    let mu = model.mean();
    let correction: f64 = model
        .coefficients()
        .iter()
        .zip(history.iter().rev())
        .map(|(a, z)| a * (z - mu))
        .sum();
    Ok(eta + mu + correction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn series(v: &[f64]) -> ErrorSeries {
        ErrorSeries::from_values(v.to_vec()).unwrap()
    }

    fn simulate_ar(alpha: &[f64], n: usize, seed: u64) -> ErrorSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let burn = 200;
        let mut z = vec![0.0; n + burn];
        for t in 0..n + burn {
            let e: f64 = StandardNormal.sample(&mut rng);
            let ar: f64 = alpha
                .iter()
                .enumerate()
                .filter(|(j, _)| t > *j)
                .map(|(j, a)| a * z[t - j - 1])
                .sum();
            z[t] = ar + e;
        }
        series(&z[burn..])
    }

    #[test]
    fn autocovariance_of_constant_series_is_zero() {
        let g = sample_autocovariance(&series(&[5.0; 4]), 1).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn autocovariance_alternating_by_hand() {
        let g = sample_autocovariance(&series(&[1.0, -1.0, 1.0, -1.0]), 1).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert!((g[1] + 0.75).abs() < 1e-15);
    }

    #[test]
    fn autocovariance_lag_zero_is_biased_variance() {
        let v = [2.0, 4.0, 4.0, 5.0, 7.0, 9.0];
        let mean = v.iter().sum::<f64>() / 6.0;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 6.0;
        let g = sample_autocovariance(&series(&v), 2).unwrap();
        assert!((g[0] - var).abs() < 1e-12);
        assert!(g.iter().all(|x| x.abs() <= g[0]));
    }

    #[test]
    fn autocovariance_errors() {
        assert!(matches!(
            sample_autocovariance(&series(&[1.0]), 0),
            Err(Error::EstimationImpossible(_))
        ));
        assert!(matches!(
            sample_autocovariance(&series(&[1.0, 2.0]), 2),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn error_series_rejects_non_finite_and_empty() {
        assert!(ErrorSeries::from_values(vec![]).is_err());
        assert!(ErrorSeries::from_values(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn order_zero_fit_is_mean_and_variance() {
        let s = series(&[1.0, 3.0, 2.0, 6.0]);
        let m = fit_yule_walker(&s, 0).unwrap();
        assert_eq!(m.order(), 0);
        assert!((m.mean() - 3.0).abs() < 1e-15);
        let g = sample_autocovariance(&s, 0).unwrap();
        assert!((m.innovation_variance() - g[0]).abs() < 1e-15);
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(
            fit_yule_walker(&series(&[2.0; 10]), 1),
            Err(Error::DegenerateSeries(_))
        ));
        assert!(matches!(
            select_order_aic(&series(&[2.0; 10]), 2),
            Err(Error::DegenerateSeries(_))
        ));
    }

    #[test]
    fn fit_requires_enough_observations() {
        assert!(matches!(
            fit_yule_walker(&series(&[1.0, 2.0, 3.0]), 2),
            Err(Error::EstimationImpossible(_))
        ));
    }

    #[test]
    fn yule_walker_matches_direct_solve_for_ar2() {
        // Order-2 Yule-Walker equations solved by Cramer's rule.
        let s = simulate_ar(&[0.5, -0.3], 300, 3);
        let g = sample_autocovariance(&s, 2).unwrap();
        let (r0, r1, r2) = (g[0], g[1], g[2]);
        let det = r0 * r0 - r1 * r1;
        let a1 = (r1 * r0 - r1 * r2) / det;
        let a2 = (r0 * r2 - r1 * r1) / det;
        let m = fit_yule_walker(&s, 2).unwrap();
        assert!((m.coefficients()[0] - a1).abs() < 1e-12);
        assert!((m.coefficients()[1] - a2).abs() < 1e-12);
        let s2 = r0 - a1 * r1 - a2 * r2;
        assert!((m.innovation_variance() - s2).abs() < 1e-12);
    }

    #[test]
    fn ar1_recovery() {
        let m = fit_yule_walker(&simulate_ar(&[0.8], 2000, 11), 1).unwrap();
        assert!((m.coefficients()[0] - 0.8).abs() < 0.05);
        assert!((m.innovation_variance() - 1.0).abs() < 0.15);
    }

    #[test]
    fn white_noise_lag_one_small() {
        let m = fit_yule_walker(&simulate_ar(&[], 2000, 5), 1).unwrap();
        assert!(m.coefficients()[0].abs() < 0.07);
    }

    #[test]
    fn aic_prefers_zero_for_near_constant_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v: Vec<f64> = (0..200)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                4.0 + 1e-6 * e
            })
            .collect();
        assert_eq!(select_order_aic(&series(&v), 10).unwrap(), 0);
    }

    #[test]
    fn aic_selects_true_order_mostly() {
        let hits = (0..100)
            .filter(|seed| {
                select_order_aic(&simulate_ar(&[0.8], 500, 1000 + seed), 15).unwrap() == 1
            })
            .count();
        assert!(hits > 50, "AR(1) selected in {hits}/100");
        let hits = (0..100)
            .filter(|seed| {
                select_order_aic(&simulate_ar(&[0.5, -0.3], 1000, 5000 + seed), 15).unwrap() == 2
            })
            .count();
        assert!(hits > 50, "AR(2) selected in {hits}/100");
    }

    #[test]
    fn aic_on_white_noise_selects_zero() {
        let hits = (0..100)
            .filter(|seed| select_order_aic(&simulate_ar(&[], 500, 777 + seed), 15).unwrap() == 0)
            .count();
        assert!(hits >= 70, "white noise selected p=0 in {hits}/100");
    }

    #[test]
    fn fit_ar_aic_agrees_with_two_step() {
        let s = simulate_ar(&[0.6, 0.2], 400, 21);
        let p = select_order_aic(&s, 8).unwrap();
        assert_eq!(fit_ar_aic(&s, 8).unwrap(), fit_yule_walker(&s, p).unwrap());
    }

    #[test]
    fn ceiling_caps_short_series() {
        assert_eq!(order_ceiling(90, 15), 9);
        assert_eq!(order_ceiling(500, 15), 15);
        assert_eq!(order_ceiling(5, 15), 0);
    }

    #[test]
    fn psi_weights_examples() {
        let ar1 = ArModel::new(0.0, vec![0.5], 1.0).unwrap();
        assert_eq!(psi_weights(&ar1, 3).unwrap().weights(), &[0.5, 0.25, 0.125]);
        let ar0 = ArModel::white_noise(0.0, 1.0).unwrap();
        assert!(psi_weights(&ar0, 10).unwrap().weights().iter().all(|p| *p == 0.0));
        let ar2 = ArModel::new(0.0, vec![0.5, 0.2], 1.0).unwrap();
        let psi = psi_weights(&ar2, 3).unwrap();
        for (a, b) in psi.weights().iter().zip([0.5, 0.45, 0.325]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(psi_weights(&ar1, 0).is_err());
    }

    #[test]
    fn process_variance_examples() {
        let ar0 = ArModel::white_noise(0.0, 2.0).unwrap();
        assert_eq!(process_variance(&ar0, 10), 2.0);
        let ar1 = ArModel::new(0.0, vec![0.5], 1.0).unwrap();
        let expected = (1.0 - 0.25f64.powi(11)) / 0.75;
        assert!((process_variance(&ar1, 10) - expected).abs() < 1e-12);
        assert!((process_variance(&ar1, 200) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ar_modified_forecast_examples() {
        let ar0 = ArModel::white_noise(1.2, 1.0).unwrap();
        assert!((ar_modified_forecast(&ar0, &[], 10.0).unwrap() - 11.2).abs() < 1e-12);
        let ar1 = ArModel::new(0.0, vec![0.5], 1.0).unwrap();
        assert_eq!(ar_modified_forecast(&ar1, &[2.0], 10.0).unwrap(), 11.0);
        // Z(t-1) = 3, Z(t-2) = -1, chronological order.
        let ar2 = ArModel::new(1.0, vec![0.4, 0.2], 1.0).unwrap();
        let out = ar_modified_forecast(&ar2, &[-1.0, 3.0], 10.0).unwrap();
        assert!((out - 11.4).abs() < 1e-12);
        assert!(matches!(
            ar_modified_forecast(&ar2, &[3.0], 10.0),
            Err(Error::InsufficientHistory { needed: 2, available: 1 })
        ));
    }

    #[test]
    fn stationarity_check() {
        assert!(ArModel::new(0.0, vec![0.5, 0.2], 1.0).unwrap().is_stationary());
        assert!(!ArModel::new(0.0, vec![1.1], 1.0).unwrap().is_stationary());
        // 1 - 0.5z - 0.6z^2 has a root inside the unit circle.
        assert!(!ArModel::new(0.0, vec![0.5, 0.6], 1.0).unwrap().is_stationary());
        assert!(ArModel::white_noise(0.0, 1.0).unwrap().is_stationary());
    }
}
