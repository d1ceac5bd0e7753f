//! Synthetic station datasets with autoregressive forecast errors.
//!
//! Each station draws a predictable weather signal
//! `s(t) = level + amplitude * sin(2 pi (t + phase) / period) + a(t)` with an
//! AR(1) anomaly `a`. The observation is `y(t) = s(t) + z(t) + v(t)` where
//! `z` is the configured AR error process and `v` is iid Gaussian noise with
//! standard deviation `observation_noise_sd`. Member `i` is
//! `x_i(t) = s(t) + bias + dispersion * member_noise_scale * e_i(t)`.
//! A dispersion factor below one therefore gives an under-dispersed ensemble.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::artime::ArModel;
use crate::ensemble::{EnsembleForecast, StationId, StationSeries};
use crate::error::{Error, Result};

const BURN_IN: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub stations: usize,
    pub days: usize,
    pub members: usize,
    pub start: NaiveDate,
    /// Station climatological levels are `level + level_spread * N(0, 1)`.
    pub level: f64,
    pub level_spread: f64,
    pub amplitude: f64,
    /// Seasonal cycle length in days.
    pub period: f64,
    pub phase: f64,
    pub anomaly_coefficient: f64,
    /// Stationary standard deviation of the weather anomaly.
    pub anomaly_sd: f64,
    /// AR coefficients of the observation error process `z`.
    pub error_coefficients: Vec<f64>,
    pub error_innovation_variance: f64,
    pub observation_noise_sd: f64,
    /// Added to every member.
    pub bias: f64,
    pub member_noise_scale: f64,
    pub dispersion: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            stations: 40,
            days: 453,
            members: 50,
            start: NaiveDate::from_ymd_opt(2010, 2, 2).expect("valid date"),
            level: 9.0,
            level_spread: 2.0,
            amplitude: 8.0,
            period: 365.25,
            phase: -80.0,
            anomaly_coefficient: 0.7,
            anomaly_sd: 3.0,
            error_coefficients: vec![0.8],
            error_innovation_variance: 0.5,
            observation_noise_sd: 1.4,
            bias: -1.5,
            member_noise_scale: 2.15,
            dispersion: 0.5,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<ArModel> {
        if self.stations == 0 || self.days == 0 {
            return Err(Error::invalid("synthetic spec needs at least one station and one day"));
        }
        if self.members < 2 {
            return Err(Error::invalid("synthetic ensembles need at least 2 members"));
        }
        let finite = [
            self.level,
            self.level_spread,
            self.amplitude,
            self.phase,
            self.bias,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("synthetic signal parameters must be finite"));
        }
        let scales = [self.anomaly_sd, self.member_noise_scale, self.observation_noise_sd];
        if !(self.period > 0.0) || scales.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::invalid("period must be positive and scales non-negative"));
        }
        if !(self.dispersion >= 0.0 && self.dispersion.is_finite()) {
            return Err(Error::invalid("dispersion factor must be non-negative"));
        }
        if !(self.anomaly_coefficient.abs() < 1.0) {
            return Err(Error::invalid("anomaly coefficient must lie in (-1, 1)"));
        }
        let model = ArModel::new(
            0.0,
            self.error_coefficients.clone(),
            self.error_innovation_variance,
        )?;
        if !model.is_stationary() {
            return Err(Error::invalid("synthetic error process is not stationary"));
        }
        Ok(model)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Generates `spec.stations` stations. Station `k` uses its own ChaCha
/// stream, so its data do not depend on the station count.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Vec<StationSeries>> {
    let model = spec.validate()?;
    let width = spec.stations.to_string().len().max(3);
    (0..spec.stations)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            station(spec, &model, StationId::new(format!("S{k:0width$}")), &mut rng)
        })
        .collect()
}

fn station(spec: &SyntheticSpec, model: &ArModel, id: StationId, rng: &mut ChaCha8Rng) -> Result<StationSeries> {
    let level = spec.level + spec.level_spread * normal(rng);
    let phi = model.coefficients();
    let sigma = model.innovation_variance().sqrt();
    let anomaly_innovation = spec.anomaly_sd * (1.0 - spec.anomaly_coefficient.powi(2)).sqrt();

    let mut anomaly = spec.anomaly_sd * normal(rng);
    let mut errors = vec![0.0; phi.len()];
    let step_error = |rng: &mut ChaCha8Rng, errors: &mut Vec<f64>| -> f64 {
        // errors holds the most recent value first
        let z = phi.iter().zip(errors.iter()).map(|(a, e)| a * e).sum::<f64>() + sigma * normal(rng);
        errors.rotate_right(1);
        if let Some(first) = errors.first_mut() {
            *first = z;
        }
        z
    };
    for _ in 0..BURN_IN {
        step_error(rng, &mut errors);
    }

    let spread = spec.dispersion * spec.member_noise_scale;
    let mut observations = Vec::with_capacity(spec.days);
    let mut forecasts = Vec::with_capacity(spec.days);
    for t in 0..spec.days {
        anomaly = spec.anomaly_coefficient * anomaly + anomaly_innovation * normal(rng);
        let seasonal = spec.amplitude * (std::f64::consts::TAU * (t as f64 + spec.phase) / spec.period).sin();
        let signal = level + seasonal + anomaly;
        let z = step_error(rng, &mut errors);
        observations.push(signal + z + spec.observation_noise_sd * normal(rng));
        let members = (0..spec.members)
            .map(|_| signal + spec.bias + spread * normal(rng))
            .collect();
        let date = spec.start + chrono::Duration::days(t as i64);
        forecasts.push(EnsembleForecast::new(id.clone(), date, members)?);
    }
    StationSeries::new(id, observations, forecasts)
}
