//! Verification report: per-case scores, aggregates and file emission.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use super::config::RunConfig;
use super::ingest::{csv_error, fmt_float, Rejection};
use crate::emos::GaussianPredictive;
use crate::ensemble::StationId;
use crate::error::{Error, Result};
use crate::pooling::{dawid_sebastiani, slp_crps, slp_moments, GridSearchResult, SlpMixture};
use crate::verification::{
    diebold_mariano, mae, pit_histogram, pit_value, pit_variance, rmv, Alternative, HistogramSpec,
    OrderFrequency, ScoreSeries, TestResult,
};
use crate::emos::gaussian_crps;

pub const EMOS: &str = "EMOS";
pub const AR_EMOS: &str = "AR-EMOS";
pub const SLP: &str = "SLP";

/// Scores of one predictive distribution on one case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub station: StationId,
    pub date: NaiveDate,
    pub method: String,
    pub mean: f64,
    pub variance: f64,
    pub obs: f64,
    pub abs_error: f64,
    pub crps: f64,
    pub dss: f64,
    pub pit: f64,
    /// Pool parameters, for SLP rows only.
    pub weight: Option<f64>,
    pub spread: Option<f64>,
}

impl ScoreRow {
    pub fn gaussian(station: &StationId, date: NaiveDate, method: &str, dist: &GaussianPredictive, obs: f64) -> Self {
        Self {
            station: station.clone(),
            date,
            method: method.to_string(),
            mean: dist.mean(),
            variance: dist.variance(),
            obs,
            abs_error: (obs - dist.mean()).abs(),
            crps: gaussian_crps(dist, obs),
            dss: dawid_sebastiani(dist.mean(), dist.variance(), obs),
            pit: pit_value(dist, obs),
            weight: None,
            spread: None,
        }
    }

    /// Scores a two-component pool whose first component has weight `weight`.
    pub fn pool(station: &StationId, date: NaiveDate, mix: &SlpMixture, obs: f64) -> Self {
        let (mean, variance) = slp_moments(mix);
        Self {
            station: station.clone(),
            date,
            method: SLP.to_string(),
            mean,
            variance,
            obs,
            abs_error: (obs - mean).abs(),
            crps: slp_crps(mix, obs),
            dss: dawid_sebastiani(mean, variance, obs),
            pit: pit_value(mix, obs),
            weight: mix.components().first().map(|c| c.weight()),
            spread: Some(mix.spread()),
        }
    }
}

/// Deterministic-style forecasts of one day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterministicRow {
    pub station: StationId,
    pub date: NaiveDate,
    pub obs: f64,
    pub raw_mean: f64,
    pub modified_mean: f64,
    pub mean_of_modified: f64,
    pub raw_median: f64,
    pub modified_median: f64,
    pub median_of_modified: f64,
    /// AIC order of the ensemble-mean error model.
    pub mean_error_order: usize,
}

pub const DETERMINISTIC_LABELS: [&str; 6] = [
    "raw-mean",
    "modified-mean",
    "mean-of-modified",
    "raw-median",
    "modified-median",
    "median-of-modified",
];

impl DeterministicRow {
    pub fn forecasts(&self) -> [f64; 6] {
        [
            self.raw_mean,
            self.modified_mean,
            self.mean_of_modified,
            self.raw_median,
            self.modified_median,
            self.median_of_modified,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub cases: usize,
    pub mae: f64,
    pub crps: f64,
    pub dss: f64,
    pub pit_variance: Option<f64>,
    pub rmv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaeSummary {
    pub forecast: String,
    pub cases: usize,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedHistogram {
    pub method: String,
    pub histogram: HistogramSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationTest {
    pub station: StationId,
    pub lag: usize,
    pub result: Option<TestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmRecord {
    pub first: String,
    pub second: String,
    pub lag: usize,
    pub days: usize,
    pub result: Option<TestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    /// Absent for reports built from precomputed forecasts.
    pub config: Option<RunConfig>,
    /// Ordered by station, date, then method.
    pub scores: Vec<ScoreRow>,
    pub methods: Vec<MethodSummary>,
    pub deterministic_rows: Vec<DeterministicRow>,
    pub deterministic: Vec<MaeSummary>,
    pub rank_histogram: Option<HistogramSpec>,
    pub pit_histograms: Vec<NamedHistogram>,
    pub order_frequency: Option<OrderFrequency>,
    pub ljung_box: Vec<StationTest>,
    pub diebold_mariano: Vec<DmRecord>,
    pub grid: Option<GridSearchResult>,
    pub rejected: Vec<Rejection>,
}

impl VerificationReport {
    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn deterministic_mae(&self, label: &str) -> Option<f64> {
        self.deterministic.iter().find(|m| m.forecast == label).map(|m| m.mae)
    }

    pub fn rows_for(&self, method: &str) -> impl Iterator<Item = &ScoreRow> {
        let method = method.to_string();
        self.scores.iter().filter(move |r| r.method == method)
    }
}

/// Aggregates per method, in the order given.
pub fn summarize_methods(scores: &[ScoreRow], methods: &[String]) -> Result<Vec<MethodSummary>> {
    methods
        .iter()
        .map(|name| {
            let rows: Vec<&ScoreRow> = scores.iter().filter(|r| &r.method == name).collect();
            let n = rows.len();
            if n == 0 {
                return Err(Error::invalid(format!("no cases for method {name}")));
            }
            let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
            let obs: Vec<f64> = rows.iter().map(|r| r.obs).collect();
            let pits: Vec<f64> = rows.iter().map(|r| r.pit).collect();
            let variances: Vec<f64> = rows.iter().map(|r| r.variance).collect();
            Ok(MethodSummary {
                method: name.clone(),
                cases: n,
                mae: mae(&means, &obs)?,
                crps: rows.iter().map(|r| r.crps).sum::<f64>() / n as f64,
                dss: rows.iter().map(|r| r.dss).sum::<f64>() / n as f64,
                pit_variance: if n >= 2 { Some(pit_variance(&pits)?) } else { None },
                rmv: rmv(&variances)?,
            })
        })
        .collect()
}

pub fn summarize_deterministic(rows: &[DeterministicRow]) -> Result<Vec<MaeSummary>> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let obs: Vec<f64> = rows.iter().map(|r| r.obs).collect();
    DETERMINISTIC_LABELS
        .iter()
        .enumerate()
        .map(|(k, label)| {
            let f: Vec<f64> = rows.iter().map(|r| r.forecasts()[k]).collect();
            Ok(MaeSummary {
                forecast: label.to_string(),
                cases: rows.len(),
                mae: mae(&f, &obs)?,
            })
        })
        .collect()
}

pub fn pit_histograms(scores: &[ScoreRow], methods: &[String], bins: usize) -> Result<Vec<NamedHistogram>> {
    methods
        .iter()
        .map(|name| {
            let pits: Vec<f64> = scores.iter().filter(|r| &r.method == name).map(|r| r.pit).collect();
            Ok(NamedHistogram {
                method: name.clone(),
                histogram: pit_histogram(&pits, bins)?,
            })
        })
        .collect()
}

/// Station-averaged CRPS per date for `method`.
fn daily_crps(scores: &[ScoreRow], method: &str) -> BTreeMap<NaiveDate, f64> {
    let mut acc: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for r in scores.iter().filter(|r| r.method == method) {
        let e = acc.entry(r.date).or_default();
        e.0 += r.crps;
        e.1 += 1;
    }
    acc.into_iter().map(|(d, (s, n))| (d, s / n as f64)).collect()
}

/// Diebold-Mariano tests on station-averaged daily CRPS over the dates
/// both methods share.
pub fn dm_tests(scores: &[ScoreRow], pairs: &[(String, String)], lag: usize) -> Vec<DmRecord> {
    pairs
        .iter()
        .map(|(first, second)| {
            let a = daily_crps(scores, first);
            let b = daily_crps(scores, second);
            let (g1, g2): (Vec<f64>, Vec<f64>) = a
                .iter()
                .filter_map(|(d, x)| b.get(d).map(|y| (*x, *y)))
                .unzip();
            let days = g1.len();
            let outcome = ScoreSeries::new(g1)
                .and_then(|s1| Ok((s1, ScoreSeries::new(g2)?)))
                .and_then(|(s1, s2)| diebold_mariano(&s1, &s2, lag, Alternative::TwoSided));
            let (result, note) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            DmRecord {
                first: first.clone(),
                second: second.clone(),
                lag,
                days,
                result,
                note,
            }
        })
        .collect()
}

fn opt_float(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(std::io::BufWriter::new(file));
    wtr.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        wtr.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("report types serialize to JSON")
}

/// Writes `scores.csv`, `summary.csv`, `deterministic.csv`, `gridtable.csv`,
/// `histograms.json`, `tests.json` and, when present, `config.toml`.
pub fn emit_report(report: &VerificationReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    write_csv(
        &out_dir.join("scores.csv"),
        &[
            "station_id", "date", "method", "mean", "variance", "obs", "abs_error", "crps", "dss", "pit",
            "weight", "spread",
        ],
        report.scores.iter().map(|r| {
            vec![
                r.station.to_string(),
                r.date.to_string(),
                r.method.clone(),
                fmt_float(r.mean),
                fmt_float(r.variance),
                fmt_float(r.obs),
                fmt_float(r.abs_error),
                fmt_float(r.crps),
                fmt_float(r.dss),
                fmt_float(r.pit),
                opt_float(r.weight),
                opt_float(r.spread),
            ]
        }),
    )?;

    let method_rows = report.methods.iter().map(|m| {
        vec![
            m.method.clone(),
            m.cases.to_string(),
            fmt_float(m.mae),
            fmt_float(m.crps),
            fmt_float(m.dss),
            opt_float(m.pit_variance),
            fmt_float(m.rmv),
        ]
    });
    let mae_rows = report.deterministic.iter().map(|m| {
        vec![
            m.forecast.clone(),
            m.cases.to_string(),
            fmt_float(m.mae),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]
    });
    write_csv(
        &out_dir.join("summary.csv"),
        &["method", "cases", "mae", "crps", "dss", "pit_variance", "rmv"],
        method_rows.chain(mae_rows),
    )?;

    write_csv(
        &out_dir.join("deterministic.csv"),
        &[
            "station_id", "date", "obs", "raw_mean", "modified_mean", "mean_of_modified", "raw_median",
            "modified_median", "median_of_modified", "mean_error_order",
        ],
        report.deterministic_rows.iter().map(|r| {
            let mut rec = vec![r.station.to_string(), r.date.to_string(), fmt_float(r.obs)];
            rec.extend(r.forecasts().iter().map(|v| fmt_float(*v)));
            rec.push(r.mean_error_order.to_string());
            rec
        }),
    )?;

    write_grid_table(report.grid.as_ref(), &out_dir.join("gridtable.csv"))?;

    let histograms = serde_json::json!({
        "empty": report.is_empty(),
        "rank_histogram": report.rank_histogram.as_ref().map(|h| &h.counts),
        "pit_histograms": report
            .pit_histograms
            .iter()
            .map(|h| (h.method.clone(), json(&h.histogram.counts)))
            .collect::<serde_json::Map<_, _>>(),
        "ar_order_frequency": report.order_frequency.as_ref().map(json),
    });
    write_json(&out_dir.join("histograms.json"), &histograms)?;

    let tests = serde_json::json!({
        "empty": report.is_empty(),
        "ljung_box": json(&report.ljung_box),
        "diebold_mariano": json(&report.diebold_mariano),
        "slp_optimum": report.grid.as_ref().map(|g| json(&g.best)),
        "rejected_stations": json(&report.rejected),
    });
    write_json(&out_dir.join("tests.json"), &tests)?;

    if let Some(cfg) = &report.config {
        let path = out_dir.join("config.toml");
        std::fs::write(&path, cfg.to_toml()?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// The SLP score table, one row per `(w1, c)` cell.
pub fn write_grid_table(grid: Option<&GridSearchResult>, path: &Path) -> Result<()> {
    let cells = grid.map(|g| g.table.as_slice()).unwrap_or(&[]);
    write_csv(
        path,
        &["weight", "spread", "crps", "dss"],
        cells.iter().map(|c| {
            vec![
                fmt_float(c.weight),
                fmt_float(c.spread),
                fmt_float(c.crps),
                fmt_float(c.dss),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2011, 3, d).unwrap()
    }

    #[test]
    fn gaussian_row_scores() {
        let g = GaussianPredictive::new(0.0, 1.0).unwrap();
        let r = ScoreRow::gaussian(&"A".into(), date(1), EMOS, &g, 0.0);
        assert_eq!(r.pit, 0.5);
        assert!((r.crps - 0.233_694_977_255_109).abs() < 1e-12);
        assert_eq!(r.dss, 0.0);
    }

    #[test]
    fn degenerate_pool_row_matches_gaussian() {
        let g1 = GaussianPredictive::new(1.3, 2.2).unwrap();
        let g2 = GaussianPredictive::new(-0.4, 0.7).unwrap();
        let mix = SlpMixture::pair(&g1, &g2, 1.0, 1.0).unwrap();
        let a = ScoreRow::gaussian(&"A".into(), date(1), SLP, &g1, 0.9);
        let mut b = ScoreRow::pool(&"A".into(), date(1), &mix, 0.9);
        b.weight = None;
        b.spread = None;
        assert_eq!(a, b);
    }

    #[test]
    fn daily_average_and_dm_alignment() {
        let g = GaussianPredictive::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        for d in 1..=10 {
            for s in ["A", "B"] {
                let y = d as f64 * 0.1 * if s == "A" { 1.0 } else { -1.0 };
                rows.push(ScoreRow::gaussian(&s.into(), date(d), EMOS, &g, y));
                rows.push(ScoreRow::gaussian(&s.into(), date(d), SLP, &g, y * 0.5));
            }
        }
        let daily = daily_crps(&rows, EMOS);
        assert_eq!(daily.len(), 10);
        let dm = dm_tests(&rows, &[(EMOS.into(), SLP.into())], 1);
        assert_eq!(dm[0].days, 10);
        assert!(dm[0].result.unwrap().statistic > 0.0);
        let same = dm_tests(&rows, &[(EMOS.into(), EMOS.into())], 1);
        assert!(same[0].result.is_none() && same[0].note.is_some());
    }

    #[test]
    fn empty_report_emits_headers() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&VerificationReport::default(), dir.path()).unwrap();
        let scores = std::fs::read_to_string(dir.path().join("scores.csv")).unwrap();
        assert_eq!(scores.lines().count(), 1);
        let hist: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("histograms.json")).unwrap()).unwrap();
        assert_eq!(hist["empty"], true);
    }
}
