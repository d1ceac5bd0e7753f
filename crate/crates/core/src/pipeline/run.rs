//! Rolling-window experiment: AR modification, AR-EMOS, local EMOS and the
//! spread-adjusted linear pool for every station and verification day.
//!
//! With `T1 = ar_training_length` and `L = emos_training_length`, day `t`
//! carries AR-modified forecasts from `t = T1` on and is a verification day
//! from `t = T1 + L` on. Every quantity for day `t` is fitted on days before
//! `t`, except under [`SlpSelection::Pooled`], where the two pool parameters
//! are chosen on the whole verification period.

use rayon::prelude::*;

use super::config::{RunConfig, SlpSelection};
use super::ingest::Dataset;
use super::report::{
    dm_tests, pit_histograms, summarize_deterministic, summarize_methods, DeterministicRow, ScoreRow,
    StationTest, VerificationReport, AR_EMOS, EMOS, SLP,
};
use crate::emos::{emos_predict, fit_emos, EmosOptions, EmosParams, GaussianPredictive, MemberWeights};
use crate::ensemble::{
    error_series, modify_ensemble, modify_forecast, summarize, EnsembleForecast, Members, Selector, StationSeries,
    SummaryKind,
};
use crate::error::{Error, Result};
use crate::pooling::{
    ar_emos_predict, evaluate_cell, grid_search_slp, select_cell, GridCell, GridSearchResult, SlpMixture,
};
use crate::verification::{ljung_box, order_frequency_table, rank_histogram};

/// Both pool components for one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayComponents {
    pub index: usize,
    pub obs: f64,
    pub emos: GaussianPredictive,
    pub ar_emos: GaussianPredictive,
}

/// Everything fitted for one station before the pool parameters are chosen.
#[derive(Debug, Clone)]
pub struct StationRun {
    pub series: StationSeries,
    pub deterministic: Vec<DeterministicRow>,
    /// Component forecasts from the first day any pool needs them.
    pub components: Vec<DayComponents>,
    pub first_verification: usize,
    pub emos_fallbacks: usize,
    pub ljung_box: StationTest,
}

impl StationRun {
    pub fn verification_components(&self) -> &[DayComponents] {
        let skip = self
            .components
            .iter()
            .position(|c| c.index >= self.first_verification)
            .unwrap_or(self.components.len());
        &self.components[skip..]
    }
}

fn required_days(config: &RunConfig) -> usize {
    config.first_verification_day() + 1
}

/// Keeps the stations named in `config.stations`, all of them when empty.
pub fn select_stations<'a>(stations: &'a [StationSeries], config: &RunConfig) -> Result<Vec<&'a StationSeries>> {
    if config.stations.is_empty() {
        return Ok(stations.iter().collect());
    }
    config
        .stations
        .iter()
        .map(|name| {
            stations
                .iter()
                .find(|s| s.station_id().as_str() == name)
                .ok_or_else(|| Error::Config(format!("station filter names unknown station '{name}'")))
        })
        .collect()
}

/// EMOS with a graceful path for an exhausted optimizer budget: the best
/// iterate is used and counted.
fn local_emos(
    forecasts: &[EnsembleForecast],
    observations: &[f64],
    options: &EmosOptions,
    fallbacks: &mut usize,
) -> Result<EmosParams> {
    match fit_emos(forecasts, observations, options) {
        Err(Error::NonConvergence { last, .. }) => {
            *fallbacks += 1;
            log::warn!(
                "EMOS optimizer budget exhausted for {} on {}; using best iterate",
                forecasts[0].station_id(),
                forecasts[forecasts.len() - 1].date()
            );
            let width = last.len() - 3;
            let weights = if options.exchangeable {
                MemberWeights::Exchangeable(last[1])
            } else {
                MemberWeights::PerMember(last[1..=width].to_vec())
            };
            EmosParams::new(last[0], weights, last[width + 1], last[width + 2])
        }
        other => other,
    }
}

/// Fits the AR models, AR-EMOS and local EMOS for one station.
pub fn run_station(series: &StationSeries, config: &RunConfig) -> Result<StationRun> {
    let t_total = series.len();
    if t_total < required_days(config) {
        return Err(Error::InsufficientHistory {
            needed: required_days(config),
            available: t_total,
        });
    }
    let t1 = config.ar_training_length;
    let l = config.emos_training_length;
    let first_verification = config.first_verification_day();
    let first_component = match config.selection {
        SlpSelection::Rolling { window } => first_verification - window,
        _ => first_verification,
    };
    let emos_options = EmosOptions {
        exchangeable: config.exchangeable,
        optimizer: None,
    };
    let id = series.station_id();
    let mut deterministic = Vec::with_capacity(t_total - t1);
    let mut components = Vec::with_capacity(t_total - first_component);
    let mut emos_fallbacks = 0;
    for t in t1..t_total {
        let forecast = &series.forecasts()[t];
        let obs = series.observations()[t];
        let modified_mean = modify_forecast(series, t, t1, config.max_ar_order, Selector::Summary(SummaryKind::Mean))?;
        let modified_median =
            modify_forecast(series, t, t1, config.max_ar_order, Selector::Summary(SummaryKind::Median))?;
        let modified = modify_ensemble(series, t, t1, config.max_ar_order)?;
        deterministic.push(DeterministicRow {
            station: id.clone(),
            date: series.date(t),
            obs,
            raw_mean: summarize(forecast, SummaryKind::Mean),
            modified_mean: modified_mean.value,
            mean_of_modified: summarize(&modified, SummaryKind::Mean),
            raw_median: summarize(forecast, SummaryKind::Median),
            modified_median: modified_median.value,
            median_of_modified: summarize(&modified, SummaryKind::Median),
            mean_error_order: modified_mean.model.order(),
        });
        if t >= first_component {
            let ar_emos = ar_emos_predict(&modified, config.psi_count)?;
            let params = local_emos(
                &series.forecasts()[t - l..t],
                &series.observations()[t - l..t],
                &emos_options,
                &mut emos_fallbacks,
            )?;
            components.push(DayComponents {
                index: t,
                obs,
                emos: emos_predict(&params, forecast)?,
                ar_emos,
            });
        }
    }

    let lag = 1;
    let ljung = error_series(series, Selector::Summary(SummaryKind::Mean), 0..t_total)
        .and_then(|errors| ljung_box(&errors, lag));
    let ljung_box = match ljung {
        Ok(result) => StationTest {
            station: id.clone(),
            lag,
            result: Some(result),
            note: None,
        },
        Err(e) => StationTest {
            station: id.clone(),
            lag,
            result: None,
            note: Some(e.to_string()),
        },
    };

    Ok(StationRun {
        series: series.clone(),
        deterministic,
        components,
        first_verification,
        emos_fallbacks,
        ljung_box,
    })
}

fn pairs(components: &[DayComponents]) -> (Vec<(GaussianPredictive, GaussianPredictive)>, Vec<f64>) {
    components.iter().map(|c| ((c.emos, c.ar_emos), c.obs)).unzip()
}

/// Per-day scores of every grid cell for the given component days.
fn cell_scores(components: &[DayComponents], config: &RunConfig) -> Result<Vec<Vec<GridCell>>> {
    let cells = config.grid.cells();
    components
        .iter()
        .map(|c| {
            cells
                .iter()
                .map(|(w, s)| evaluate_cell(&[(c.emos, c.ar_emos)], &[c.obs], *w, *s))
                .collect()
        })
        .collect()
}

/// Pool parameters `(w1, c)` for each verification day of a station.
fn rolling_choices(run: &StationRun, window: usize, config: &RunConfig) -> Result<Vec<(f64, f64)>> {
    let scores = cell_scores(&run.components, config)?;
    let offset = run.components.len() - run.verification_components().len();
    (offset..run.components.len())
        .map(|k| {
            let days = &scores[k - window..k];
            let table: Vec<GridCell> = (0..days[0].len())
                .map(|j| {
                    let n = days.len() as f64;
                    GridCell {
                        weight: days[0][j].weight,
                        spread: days[0][j].spread,
                        crps: days.iter().map(|d| d[j].crps).sum::<f64>() / n,
                        dss: days.iter().map(|d| d[j].dss).sum::<f64>() / n,
                    }
                })
                .collect();
            select_cell(&table, config.objective())
                .map(|c| (c.weight, c.spread))
                .ok_or_else(|| Error::invalid("rolling SLP selection found no finite score"))
        })
        .collect()
}

/// The pooled score table of every grid cell over all verification cases.
pub fn pooled_grid(runs: &[StationRun], config: &RunConfig) -> Result<Option<GridSearchResult>> {
    let all: Vec<DayComponents> = runs
        .iter()
        .flat_map(|r| r.verification_components().iter().copied())
        .collect();
    if all.is_empty() {
        return Ok(None);
    }
    let (components, obs) = pairs(&all);
    grid_search_slp(&components, &obs, &config.grid).map(Some)
}

/// Fits every station in parallel. Results keep the input order.
pub fn run_stations(stations: &[StationSeries], config: &RunConfig) -> Result<Vec<StationRun>> {
    config.validate()?;
    let selected = select_stations(stations, config)?;
    selected.par_iter().map(|s| run_station(s, config)).collect()
}

pub fn run_experiment(stations: &[StationSeries], config: &RunConfig) -> Result<VerificationReport> {
    let runs = run_stations(stations, config)?;
    assemble_report(&runs, config)
}

/// Runs on an ingested dataset, carrying its rejections into the report.
pub fn run_dataset(dataset: &Dataset, config: &RunConfig) -> Result<VerificationReport> {
    let mut report = run_experiment(&dataset.stations, config)?;
    report.rejected = dataset.rejected.clone();
    Ok(report)
}

pub fn assemble_report(runs: &[StationRun], config: &RunConfig) -> Result<VerificationReport> {
    let grid = pooled_grid(runs, config)?;
    let choices: Vec<Vec<(f64, f64)>> = match config.selection {
        SlpSelection::Rolling { window } => runs
            .par_iter()
            .map(|r| rolling_choices(r, window, config))
            .collect::<Result<_>>()?,
        SlpSelection::Pooled => {
            let best = grid.as_ref().map(|g| (g.best.weight, g.best.spread));
            runs.iter()
                .map(|r| vec![best.unwrap_or((1.0, 1.0)); r.verification_components().len()])
                .collect()
        }
        SlpSelection::Fixed { weight, spread } => runs
            .iter()
            .map(|r| vec![(weight, spread); r.verification_components().len()])
            .collect(),
    };

    let mut scores = Vec::new();
    let mut ensembles: Vec<EnsembleForecast> = Vec::new();
    let mut observations = Vec::new();
    for (run, days) in runs.iter().zip(&choices) {
        let id = run.series.station_id();
        for (c, (w, s)) in run.verification_components().iter().zip(days) {
            let date = run.series.date(c.index);
            scores.push(ScoreRow::gaussian(id, date, EMOS, &c.emos, c.obs));
            scores.push(ScoreRow::gaussian(id, date, AR_EMOS, &c.ar_emos, c.obs));
            let mix = SlpMixture::pair(&c.emos, &c.ar_emos, *w, *s)?;
            scores.push(ScoreRow::pool(id, date, &mix, c.obs));
            ensembles.push(run.series.forecasts()[c.index].clone());
            observations.push(c.obs);
        }
    }

    let deterministic_rows: Vec<DeterministicRow> = runs.iter().flat_map(|r| r.deterministic.iter().cloned()).collect();
    let orders: Vec<usize> = deterministic_rows.iter().map(|r| r.mean_error_order).collect();
    let methods: Vec<String> = [EMOS, AR_EMOS, SLP].map(String::from).to_vec();
    let empty = scores.is_empty();
    let fallbacks: usize = runs.iter().map(|r| r.emos_fallbacks).sum();
    if fallbacks > 0 {
        log::warn!("{fallbacks} EMOS fits used the best iterate of an unconverged search");
    }

    Ok(VerificationReport {
        config: Some(config.clone()),
        methods: if empty { Vec::new() } else { summarize_methods(&scores, &methods)? },
        pit_histograms: if empty {
            Vec::new()
        } else {
            pit_histograms(&scores, &methods, config.pit_bins)?
        },
        rank_histogram: if empty {
            None
        } else {
            Some(rank_histogram(&ensembles, &observations, config.seed)?)
        },
        diebold_mariano: if empty {
            Vec::new()
        } else {
            dm_tests(
                &scores,
                &[
                    (EMOS.into(), SLP.into()),
                    (AR_EMOS.into(), SLP.into()),
                    (EMOS.into(), AR_EMOS.into()),
                ],
                config.dm_lag,
            )
        },
        deterministic: summarize_deterministic(&deterministic_rows)?,
        order_frequency: Some(order_frequency_table(&orders)),
        deterministic_rows,
        ljung_box: runs.iter().map(|r| r.ljung_box.clone()).collect(),
        scores,
        grid,
        rejected: Vec::new(),
    })
}

/// One row of the AR training-length study.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SweepRow {
    pub ar_training_length: usize,
    pub cases: usize,
    pub mae_raw_mean: f64,
    pub mae_modified_mean: f64,
}

/// MAE of the AR-modified ensemble mean for each candidate `T1`. By default
/// each `T1` is scored on its own days `T1..T`; with `common_period` all are
/// scored on the days after the largest candidate.
pub fn sweep_t1(
    stations: &[StationSeries],
    candidates: &[usize],
    max_order: usize,
    common_period: bool,
) -> Result<Vec<SweepRow>> {
    if candidates.is_empty() {
        return Err(Error::invalid("no training lengths to sweep"));
    }
    let longest = *candidates.iter().max().expect("non-empty");
    candidates
        .iter()
        .map(|&t1| {
            if t1 < max_order + 2 {
                return Err(Error::Config(format!(
                    "training length {t1} is below max_ar_order + 2 = {}",
                    max_order + 2
                )));
            }
            let start = if common_period { longest } else { t1 };
            let per_station: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = stations
                .par_iter()
                .map(|s| {
                    let mut raw = Vec::new();
                    let mut modified = Vec::new();
                    let mut obs = Vec::new();
                    for t in start..s.len() {
                        let f = modify_forecast(s, t, t1, max_order, Selector::Summary(SummaryKind::Mean))?;
                        raw.push(crate::ensemble::mean(s.forecasts()[t].members()));
                        modified.push(f.value);
                        obs.push(s.observations()[t]);
                    }
                    Ok((raw, modified, obs))
                })
                .collect::<Result<_>>()?;
            let (mut raw, mut modified, mut obs) = (Vec::new(), Vec::new(), Vec::new());
            for (r, m, o) in per_station {
                raw.extend(r);
                modified.extend(m);
                obs.extend(o);
            }
            if obs.is_empty() {
                return Err(Error::InsufficientHistory {
                    needed: start + 1,
                    available: stations.iter().map(|s| s.len()).max().unwrap_or(0),
                });
            }
            Ok(SweepRow {
                ar_training_length: t1,
                cases: obs.len(),
                mae_raw_mean: crate::verification::mae(&raw, &obs)?,
                mae_modified_mean: crate::verification::mae(&modified, &obs)?,
            })
        })
        .collect()
}

