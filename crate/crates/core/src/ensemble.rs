//! Station/date indexed ensemble forecasts, forecast-error series and the
//! AR-modified ensemble.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::artime::{self, ArModel, ErrorSeries};
use crate::error::{Error, Result};

/// Opaque station identifier, cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationId(Arc<str>);

impl StationId {
    pub fn new(id: impl AsRef<str>) -> Self {
        Self(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for StationId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// Anything that carries a set of ensemble member values.
pub trait Members {
    fn members(&self) -> &[f64];
}

/// One station-day of raw ensemble forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleForecast {
    station_id: StationId,
    date: NaiveDate,
    members: Vec<f64>,
}

impl EnsembleForecast {
    pub fn new(station_id: StationId, date: NaiveDate, members: Vec<f64>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "ensemble needs at least 2 members, got {}",
                members.len()
            )));
        }
        if members.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite ensemble member at station {station_id} on {date}"
            )));
        }
        Ok(Self {
            station_id,
            date,
            members,
        })
    }

    pub fn station_id(&self) -> &StationId {
        &self.station_id
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }
}

impl Members for EnsembleForecast {
    fn members(&self) -> &[f64] {
        &self.members
    }
}

/// Gap-free daily series of observations and aligned ensemble forecasts for
/// one station.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    station_id: StationId,
    observations: Vec<f64>,
    forecasts: Vec<EnsembleForecast>,
}

impl StationSeries {
    pub fn new(
        station_id: StationId,
        observations: Vec<f64>,
        forecasts: Vec<EnsembleForecast>,
    ) -> Result<Self> {
        if observations.len() != forecasts.len() {
            return Err(Error::invalid(format!(
                "station {station_id}: {} observations but {} forecasts",
                observations.len(),
                forecasts.len()
            )));
        }
        if observations.is_empty() {
            return Err(Error::invalid(format!("station {station_id}: empty series")));
        }
        if observations.iter().any(|y| !y.is_finite()) {
            return Err(Error::invalid(format!(
                "station {station_id}: non-finite observation"
            )));
        }
        let m = forecasts[0].member_count();
        for f in &forecasts {
            if f.station_id != station_id {
                return Err(Error::invalid(format!(
                    "forecast for station {} inside series of station {station_id}",
                    f.station_id
                )));
            }
            if f.member_count() != m {
                return Err(Error::invalid(format!(
                    "station {station_id}: member count changes from {m} to {} on {}",
                    f.member_count(),
                    f.date
                )));
            }
        }
        for pair in forecasts.windows(2) {
            if pair[0].date.succ_opt() != Some(pair[1].date) {
                return Err(Error::invalid(format!(
                    "station {station_id}: dates {} and {} are not consecutive days",
                    pair[0].date, pair[1].date
                )));
            }
        }
        Ok(Self {
            station_id,
            observations,
            forecasts,
        })
    }

    pub fn station_id(&self) -> &StationId {
        &self.station_id
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn member_count(&self) -> usize {
        self.forecasts[0].member_count()
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn forecasts(&self) -> &[EnsembleForecast] {
        &self.forecasts
    }

    pub fn date(&self, index: usize) -> NaiveDate {
        self.forecasts[index].date
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.forecasts.iter().map(|f| f.date)
    }

    /// Copy of the series with the observation at `index` replaced.
    pub fn with_observation(&self, index: usize, value: f64) -> Result<Self> {
        let mut observations = self.observations.clone();
        *observations
            .get_mut(index)
            .ok_or_else(|| Error::invalid(format!("index {index} out of range")))? = value;
        Self::new(self.station_id.clone(), observations, self.forecasts.clone())
    }
}

/// Deterministic-style summary of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryKind {
    Mean,
    Median,
}

/// Which deterministic-style forecast `eta(t)` an error series refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Member(usize),
    Summary(SummaryKind),
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample median; midpoint of the two central order statistics for even length.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn summarize(ensemble: &impl Members, kind: SummaryKind) -> f64 {
    match kind {
        SummaryKind::Mean => mean(ensemble.members()),
        SummaryKind::Median => median(ensemble.members()),
    }
}

fn select(forecast: &EnsembleForecast, selector: Selector) -> Result<f64> {
    match selector {
        Selector::Member(i) => forecast.members.get(i).copied().ok_or_else(|| {
            Error::invalid(format!(
                "member index {i} out of range for {} members",
                forecast.member_count()
            ))
        }),
        Selector::Summary(kind) => Ok(summarize(forecast, kind)),
    }
}

/// Forecast errors `Z(t) = y(t) - eta(t)` over `window`.
pub fn error_series(
    series: &StationSeries,
    selector: Selector,
    window: Range<usize>,
) -> Result<ErrorSeries> {
    if window.is_empty() {
        return Err(Error::invalid("empty error-series window"));
    }
    if window.end > series.len() {
        return Err(Error::invalid(format!(
            "window {window:?} exceeds series length {}",
            series.len()
        )));
    }
    let values = window
        .clone()
        .map(|t| Ok(series.observations[t] - select(&series.forecasts[t], selector)?))
        .collect::<Result<Vec<_>>>()?;
    ErrorSeries::new(values, window.start)
}

/// Ensemble whose members were individually AR-corrected.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModifiedEnsemble {
    date: NaiveDate,
    members: Vec<f64>,
    member_models: Vec<ArModel>,
}

impl ArModifiedEnsemble {
    pub fn new(date: NaiveDate, members: Vec<f64>, member_models: Vec<ArModel>) -> Result<Self> {
        if members.len() != member_models.len() || members.len() < 2 {
            return Err(Error::invalid(
                "modified ensemble needs one model per member and at least 2 members",
            ));
        }
        Ok(Self {
            date,
            members,
            member_models,
        })
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn member_models(&self) -> &[ArModel] {
        &self.member_models
    }
}

impl Members for ArModifiedEnsemble {
    fn members(&self) -> &[f64] {
        &self.members
    }
}

/// A deterministic-style forecast after AR modification, with its model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedForecast {
    pub value: f64,
    pub model: ArModel,
}

fn training_window(series: &StationSeries, t: usize, training_length: usize) -> Result<Range<usize>> {
    if t >= series.len() {
        return Err(Error::invalid(format!(
            "forecast index {t} outside series of length {}",
            series.len()
        )));
    }
    if t < training_length {
        return Err(Error::InsufficientHistory {
            needed: training_length,
            available: t,
        });
    }
    if training_length < 3 {
        return Err(Error::invalid("AR training length must be at least 3 days"));
    }
    Ok(t - training_length..t)
}

/// AIC order selection and Yule-Walker fit with the degenerate-series
/// fallback to a zero-variance bias correction.
pub fn fit_error_model(errors: &ErrorSeries, max_order: usize) -> Result<ArModel> {
    let ceiling = artime::order_ceiling(errors.len(), max_order);
    match artime::fit_ar_aic(errors, ceiling) {
        Ok(model) => Ok(model),
        Err(Error::DegenerateSeries(reason)) => {
            log::warn!(
                "degenerate error series starting at index {} ({reason}); using bias correction",
                errors.start_index()
            );
            ArModel::white_noise(errors.mean(), 0.0)
        }
        Err(e) => Err(e),
    }
}

/// AR modification of a single deterministic-style forecast for day `t`,
/// trained on the `training_length` preceding days.
pub fn modify_forecast(
    series: &StationSeries,
    t: usize,
    training_length: usize,
    max_order: usize,
    selector: Selector,
) -> Result<ModifiedForecast> {
    let window = training_window(series, t, training_length)?;
    let errors = error_series(series, selector, window)?;
    let model = fit_error_model(&errors, max_order)?;
    let eta = select(&series.forecasts[t], selector)?;
    let value = artime::ar_modified_forecast(&model, errors.values(), eta)?;
    Ok(ModifiedForecast { value, model })
}

/// Applies the AR modification to every member independently.
pub fn modify_ensemble(
    series: &StationSeries,
    t: usize,
    training_length: usize,
    max_order: usize,
) -> Result<ArModifiedEnsemble> {
    let window = training_window(series, t, training_length)?;
    let m = series.member_count();
    let mut members = Vec::with_capacity(m);
    let mut models = Vec::with_capacity(m);
    for i in 0..m {
        let errors = error_series(series, Selector::Member(i), window.clone())?;
        let model = fit_error_model(&errors, max_order)?;
        let eta = series.forecasts[t].members[i];
        members.push(artime::ar_modified_forecast(&model, errors.values(), eta)?);
        models.push(model);
    }
    ArModifiedEnsemble::new(series.date(t), members, models)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2010, 2, 2).unwrap() + chrono::Duration::days(i)
    }

    fn station(obs: Vec<f64>, members: Vec<Vec<f64>>) -> StationSeries {
        let id = StationId::new("S1");
        let forecasts = members
            .into_iter()
            .enumerate()
            .map(|(i, m)| EnsembleForecast::new(id.clone(), day(i as i64), m).unwrap())
            .collect();
        StationSeries::new(id, obs, forecasts).unwrap()
    }

    #[test]
    fn summaries() {
        let f = EnsembleForecast::new("a".into(), day(0), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(summarize(&f, SummaryKind::Mean), 2.0);
        let f = EnsembleForecast::new("a".into(), day(0), vec![1.0, 9.0, 2.0]).unwrap();
        assert_eq!(summarize(&f, SummaryKind::Median), 2.0);
        let f = EnsembleForecast::new("a".into(), day(0), vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(summarize(&f, SummaryKind::Median), 2.5);
    }

    #[test]
    fn ensemble_validation() {
        assert!(EnsembleForecast::new("a".into(), day(0), vec![1.0]).is_err());
        assert!(EnsembleForecast::new("a".into(), day(0), vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn station_series_rejects_gaps_and_member_changes() {
        let id = StationId::new("S");
        let f0 = EnsembleForecast::new(id.clone(), day(0), vec![1.0, 2.0]).unwrap();
        let f2 = EnsembleForecast::new(id.clone(), day(2), vec![1.0, 2.0]).unwrap();
        assert!(StationSeries::new(id.clone(), vec![1.0, 2.0], vec![f0.clone(), f2]).is_err());
        let f1 = EnsembleForecast::new(id.clone(), day(1), vec![1.0, 2.0, 3.0]).unwrap();
        assert!(StationSeries::new(id.clone(), vec![1.0, 2.0], vec![f0.clone(), f1]).is_err());
        assert!(StationSeries::new(id, vec![1.0], vec![f0.clone(), f0]).is_err());
    }

    #[test]
    fn error_series_examples() {
        let s = station(vec![3.0, 4.0], vec![vec![1.0, 3.0], vec![4.0, 6.0]]);
        let z = error_series(&s, Selector::Summary(SummaryKind::Mean), 0..2).unwrap();
        assert_eq!(z.values(), &[1.0, -1.0]);

        let s = station(vec![3.0, 4.0], vec![vec![3.0, 0.0], vec![4.0, 7.0]]);
        let z = error_series(&s, Selector::Member(0), 0..2).unwrap();
        assert_eq!(z.values(), &[0.0, 0.0]);

        let s = station(vec![3.0], vec![vec![1.0, 2.0, 9.0]]);
        let z = error_series(&s, Selector::Summary(SummaryKind::Median), 0..1).unwrap();
        assert_eq!(z.values(), &[1.0]);

        assert!(error_series(&s, Selector::Member(0), 0..0).is_err());
        assert!(error_series(&s, Selector::Member(5), 0..1).is_err());
        assert!(error_series(&s, Selector::Member(0), 0..3).is_err());
    }

    #[test]
    fn perfect_members_are_unchanged() {
        let n = 40;
        let obs: Vec<f64> = (0..n).map(|t| (t as f64 * 0.3).sin() * 5.0).collect();
        let members = obs.iter().map(|y| vec![*y, *y, *y]).collect();
        let s = station(obs, members);
        let out = modify_ensemble(&s, 35, 30, 15).unwrap();
        assert_eq!(out.members(), s.forecasts()[35].members());
        assert!(out.member_models().iter().all(|m| m.order() == 0));
    }

    #[test]
    fn constant_error_is_pure_bias_correction() {
        let n = 40;
        let obs: Vec<f64> = (0..n).map(|t| t as f64).collect();
        let members = obs.iter().map(|y| vec![y - 1.0, y - 1.0]).collect();
        let s = station(obs, members);
        let out = modify_ensemble(&s, 39, 30, 15).unwrap();
        for (mod_x, raw_x) in out.members().iter().zip(s.forecasts()[39].members()) {
            assert!((mod_x - (raw_x + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn modify_requires_history() {
        let s = station(vec![1.0; 5], vec![vec![1.0, 2.0]; 5]);
        assert!(matches!(
            modify_ensemble(&s, 3, 4, 1),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn mean_error_consistency() {
        let s = station(
            vec![1.0, 2.0, 4.0],
            vec![vec![0.0, 1.0], vec![5.0, 1.0], vec![3.0, 3.5]],
        );
        let z = error_series(&s, Selector::Summary(SummaryKind::Mean), 0..3).unwrap();
        for t in 0..3 {
            let expected = s.observations()[t] - summarize(&s.forecasts()[t], SummaryKind::Mean);
            assert_eq!(z.values()[t], expected);
        }
    }
}
