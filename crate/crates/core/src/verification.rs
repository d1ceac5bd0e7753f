//! Scores and calibration diagnostics: MAE, PIT and rank histograms, PIT
//! variance, root mean variance, and the Ljung-Box and Diebold-Mariano tests.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::artime::{self, ErrorSeries};
use crate::emos::GaussianPredictive;
use crate::ensemble::{EnsembleForecast, Members};
use crate::error::{Error, Result};
use crate::normal;
use crate::pooling::SlpMixture;

/// Default bin count for PIT histograms.
pub const DEFAULT_PIT_BINS: usize = 20;

/// A predictive distribution that can be evaluated at an observation.
pub trait PredictiveCdf {
    fn cdf(&self, y: f64) -> f64;
}

impl PredictiveCdf for GaussianPredictive {
    fn cdf(&self, y: f64) -> f64 {
        GaussianPredictive::cdf(self, y)
    }
}

impl PredictiveCdf for SlpMixture {
    fn cdf(&self, y: f64) -> f64 {
        SlpMixture::cdf(self, y)
    }
}

impl<F: Fn(f64) -> f64> PredictiveCdf for F {
    fn cdf(&self, y: f64) -> f64 {
        self(y)
    }
}

/// Per-day scores `g_t`, e.g. station-averaged CRPS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreSeries(Vec<f64>);

impl ScoreSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("score series contains non-finite values"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

/// Bin counts of a rank or PIT histogram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub counts: Vec<usize>,
}

impl HistogramSpec {
    pub fn empty(bins: usize) -> Self {
        Self {
            counts: vec![0; bins],
        }
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Pearson chi-square test of uniformity across bins: `(statistic, p)`.
    pub fn chi_square_uniformity(&self) -> Result<(f64, f64)> {
        let k = self.counts.len();
        let n = self.total();
        if k < 2 || n == 0 {
            return Err(Error::invalid("uniformity test needs >= 2 bins and >= 1 case"));
        }
        let expected = n as f64 / k as f64;
        let stat: f64 = self
            .counts
            .iter()
            .map(|c| (*c as f64 - expected).powi(2) / expected)
            .sum();
        Ok((stat, chi_square_sf(stat, (k - 1) as f64)))
    }
}

fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    // dof > 0 is guaranteed by callers
    let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
    dist.sf(stat)
}

/// Mean absolute error.
pub fn mae(forecasts: &[f64], observations: &[f64]) -> Result<f64> {
    if forecasts.len() != observations.len() {
        return Err(Error::invalid(format!(
            "{} forecasts but {} observations",
            forecasts.len(),
            observations.len()
        )));
    }
    if forecasts.is_empty() {
        return Err(Error::invalid("MAE of an empty sample"));
    }
    Ok(forecasts
        .iter()
        .zip(observations)
        .map(|(f, y)| (y - f).abs())
        .sum::<f64>()
        / forecasts.len() as f64)
}

/// Probability integral transform `F(y_obs)`.
pub fn pit_value(forecast: &impl PredictiveCdf, y_obs: f64) -> f64 {
    forecast.cdf(y_obs).clamp(0.0, 1.0)
}

/// Sample variance (divisor `n - 1`) of PIT values; 1/12 is neutral dispersion.
pub fn pit_variance(pits: &[f64]) -> Result<f64> {
    let n = pits.len();
    if n < 2 {
        return Err(Error::invalid("PIT variance needs at least 2 values"));
    }
    let mean = pits.iter().sum::<f64>() / n as f64;
    Ok(pits.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0))
}

/// Equal-width PIT histogram on `[0, 1]`; a PIT of exactly 1 lands in the last bin.
pub fn pit_histogram(pits: &[f64], bins: usize) -> Result<HistogramSpec> {
    if bins == 0 {
        return Err(Error::invalid("PIT histogram needs at least one bin"));
    }
    let mut hist = HistogramSpec::empty(bins);
    for p in pits {
        if !(0.0..=1.0).contains(p) {
            return Err(Error::invalid(format!("PIT value {p} outside [0, 1]")));
        }
        let bin = ((p * bins as f64) as usize).min(bins - 1);
        hist.counts[bin] += 1;
    }
    Ok(hist)
}

/// Rank (1-based, `1..=m+1`) of `y` among `members`; ties are resolved by a
/// uniformly random position among the tied slots.
pub fn observation_rank<R: Rng + ?Sized>(members: &[f64], y: f64, rng: &mut R) -> usize {
    let below = members.iter().filter(|x| **x < y).count();
    let ties = members.iter().filter(|x| **x == y).count();
    let offset = if ties > 0 { rng.random_range(0..=ties) } else { 0 };
    below + 1 + offset
}

/// Verification rank histogram with `m + 1` bins.
pub fn rank_histogram(
    ensembles: &[EnsembleForecast],
    observations: &[f64],
    seed: u64,
) -> Result<HistogramSpec> {
    if ensembles.len() != observations.len() {
        return Err(Error::invalid("rank histogram inputs are not aligned"));
    }
    let Some(first) = ensembles.first() else {
        return Err(Error::invalid("rank histogram of an empty sample"));
    };
    let m = first.member_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = HistogramSpec::empty(m + 1);
    for (e, y) in ensembles.iter().zip(observations) {
        if e.member_count() != m {
            return Err(Error::invalid("member count varies across the rank histogram sample"));
        }
        hist.counts[observation_rank(e.members(), *y, &mut rng) - 1] += 1;
    }
    Ok(hist)
}

/// Root mean variance, a sharpness measure.
pub fn rmv(variances: &[f64]) -> Result<f64> {
    if variances.is_empty() {
        return Err(Error::invalid("RMV of an empty sample"));
    }
    if variances.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("variances must be non-negative"));
    }
    Ok((variances.iter().sum::<f64>() / variances.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Ljung-Box portmanteau test `Q = n(n+2) sum_{k<=lag} rho_k^2 / (n-k)`,
/// p-value from chi-square with `lag` degrees of freedom.
pub fn ljung_box(series: &ErrorSeries, lag: usize) -> Result<TestResult> {
    let n = series.len();
    if lag == 0 || n <= lag + 1 {
        return Err(Error::invalid(format!(
            "Ljung-Box with lag {lag} needs more than {} observations, got {n}",
            lag + 1
        )));
    }
    let gamma = artime::sample_autocovariance(series, lag)?;
    if !(gamma[0] > 0.0) {
        return Err(Error::DegenerateSeries("Ljung-Box on a constant series".into()));
    }
    let nf = n as f64;
    let q = nf
        * (nf + 2.0)
        * (1..=lag)
            .map(|k| (gamma[k] / gamma[0]).powi(2) / (nf - k as f64))
            .sum::<f64>();
    Ok(TestResult {
        statistic: q,
        p_value: chi_square_sf(q, lag as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// The first forecast has the smaller expected score.
    Less,
    /// The first forecast has the larger expected score.
    Greater,
}

/// Diebold-Mariano statistic `S = sqrt(T) dbar / sqrt(sum_{|tau|<h} gamma_d(tau))`
/// on `d_t = g1_t - g2_t`, referred to the standard normal law.
pub fn diebold_mariano(
    g1: &ScoreSeries,
    g2: &ScoreSeries,
    h: usize,
    alternative: Alternative,
) -> Result<TestResult> {
    let t = g1.len();
    if t != g2.len() {
        return Err(Error::invalid(format!(
            "score series lengths differ: {t} vs {}",
            g2.len()
        )));
    }
    if h == 0 || t <= 2 * h {
        return Err(Error::invalid(format!(
            "Diebold-Mariano with h={h} needs more than {} days, got {t}",
            2 * h
        )));
    }
    if g1 == g2 {
        return Err(Error::DegenerateDifferential("score series are identical".into()));
    }
    let d: Vec<f64> = g1.values().iter().zip(g2.values()).map(|(a, b)| a - b).collect();
    let tf = t as f64;
    let dbar = d.iter().sum::<f64>() / tf;
    let gamma = |lag: usize| -> f64 {
        d[lag..]
            .iter()
            .zip(&d[..t - lag])
            .map(|(a, b)| (a - dbar) * (b - dbar))
            .sum::<f64>()
            / tf
    };
    let long_run = gamma(0) + 2.0 * (1..h).map(gamma).sum::<f64>();
    if !(long_run > 0.0) {
        return Err(Error::DegenerateDifferential(format!(
            "non-positive long-run variance {long_run}"
        )));
    }
    let statistic = tf.sqrt() * dbar / long_run.sqrt();
    let p_value = match alternative {
        Alternative::TwoSided => 2.0 * normal::std_cdf(-statistic.abs()),
        Alternative::Less => normal::std_cdf(statistic),
        Alternative::Greater => normal::std_cdf(-statistic),
    };
    Ok(TestResult { statistic, p_value })
}

/// Frequencies of selected AR orders, with orders >= 5 also pooled.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OrderFrequency {
    pub counts: BTreeMap<usize, usize>,
    pub five_or_more: usize,
}

pub const ORDER_BUCKET_START: usize = 5;

pub fn order_frequency_table(orders: &[usize]) -> OrderFrequency {
    let mut table = OrderFrequency::default();
    for p in orders {
        *table.counts.entry(*p).or_default() += 1;
        if *p >= ORDER_BUCKET_START {
            table.five_or_more += 1;
        }
    }
    table
}

impl OrderFrequency {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn count(&self, order: usize) -> usize {
        self.counts.get(&order).copied().unwrap_or(0)
    }

    /// Most frequent order; ties go to the smaller order.
    pub fn mode(&self) -> Option<usize> {
        self.counts
            .iter()
            .fold(None, |best: Option<(usize, usize)>, (p, c)| match best {
                Some((_, bc)) if bc >= *c => best,
                _ => Some((*p, *c)),
            })
            .map(|(p, _)| p)
    }
}
