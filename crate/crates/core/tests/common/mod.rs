//! Independent oracles and simulators shared by the integration tests.
#![allow(dead_code)]

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use aremos::ensemble::{EnsembleForecast, StationId, StationSeries};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_cdf(mu: f64, sigma: f64, y: f64) -> f64 {
    0.5 * libm::erfc(-(y - mu) / (sigma * std::f64::consts::SQRT_2))
}

/// Trapezoid rule for the integral of `(F(y) - 1{y >= obs})^2` over `[lo, hi]`,
/// split at `obs` so the indicator jump falls on a node. Nodes are at most
/// `max_step` apart.
pub fn crps_quadrature(cdf: impl Fn(f64) -> f64, obs: f64, lo: f64, hi: f64, max_step: f64) -> f64 {
    let lo = lo.min(obs);
    let hi = hi.max(obs);
    let below = trapezoid(|y| cdf(y).powi(2), lo, obs, max_step);
    let above = trapezoid(|y| (1.0 - cdf(y)).powi(2), obs, hi, max_step);
    below + above
}

fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, max_step: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let steps = ((b - a) / max_step).ceil().max(1.0) as usize;
    let h = (b - a) / steps as f64;
    let inner: f64 = (1..steps).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

/// Companion matrix of `x_t = sum a_k x_{t-k} + e_t`.
pub fn companion(coefficients: &[f64]) -> DMatrix<f64> {
    let p = coefficients.len();
    let mut m = DMatrix::zeros(p, p);
    for (k, a) in coefficients.iter().enumerate() {
        m[(0, k)] = *a;
    }
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    m
}

/// Stationary iff every eigenvalue of the companion matrix lies inside the unit circle.
pub fn spectral_radius(coefficients: &[f64]) -> f64 {
    if coefficients.is_empty() {
        return 0.0;
    }
    companion(coefficients)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// MA(infinity) weights as the top-left entries of companion matrix powers.
pub fn psi_by_matrix_powers(coefficients: &[f64], count: usize) -> Vec<f64> {
    let p = coefficients.len();
    if p == 0 {
        let mut psi = vec![0.0; count];
        if count > 0 {
            psi[0] = 1.0;
        }
        return psi;
    }
    let c = companion(coefficients);
    let mut power = DMatrix::<f64>::identity(p, p);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(power[(0, 0)]);
        power = &c * &power;
    }
    out
}

/// Zero-mean AR series after a burn-in.
pub fn simulate_ar(coefficients: &[f64], sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let burn = 500;
    let p = coefficients.len();
    let mut x = vec![0.0; burn + n];
    for t in 0..burn + n {
        let mut v = sigma * std_normal(&mut r);
        for k in 0..p.min(t) {
            v += coefficients[k] * x[t - 1 - k];
        }
        x[t] = v;
    }
    x.split_off(burn)
}

pub fn day(offset: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 1).unwrap() + chrono::Days::new(offset as u64)
}

/// Station with the given observations and member rows.
pub fn station(id: &str, observations: Vec<f64>, members: Vec<Vec<f64>>) -> StationSeries {
    let sid = StationId::new(id);
    let forecasts = members
        .into_iter()
        .enumerate()
        .map(|(t, m)| EnsembleForecast::new(sid.clone(), day(t), m).unwrap())
        .collect();
    StationSeries::new(sid, observations, forecasts).unwrap()
}
