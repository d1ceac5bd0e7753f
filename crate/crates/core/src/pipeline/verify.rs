//! Scores for precomputed Gaussian forecasts in long format:
//! `station_id,date,method,mean,variance,obs`.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;

use super::report::{dm_tests, pit_histograms, summarize_methods, ScoreRow, VerificationReport};
use crate::emos::GaussianPredictive;
use crate::ensemble::StationId;
use crate::error::{Error, Result};

const HEADER: [&str; 6] = ["station_id", "date", "method", "mean", "variance", "obs"];

pub fn read_forecasts(path: &Path) -> Result<Vec<ScoreRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_forecasts(file)
}

/// Parses and scores every row. Rows come back ordered by station, date
/// and method order of first appearance.
pub fn parse_forecasts<R: Read>(reader: R) -> Result<Vec<ScoreRow>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.iter().map(str::trim).ne(HEADER) {
        return Err(Error::Schema {
            line: 1,
            message: format!("header must be {}", HEADER.join(",")),
        });
    }
    let mut methods: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != HEADER.len() {
            return Err(Error::Schema {
                line,
                message: format!("expected {} fields, found {}", HEADER.len(), record.len()),
            });
        }
        let parse_err = |message: String| Error::Parse { line, message };
        let number = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(format!("{}: '{}' is not a number", HEADER[i], &record[i])))
        };
        let date = NaiveDate::parse_from_str(record[1].trim(), "%Y-%m-%d")
            .map_err(|e| parse_err(format!("date '{}': {e}", &record[1])))?;
        let method = record[2].trim().to_string();
        let dist = GaussianPredictive::new(number(3)?, number(4)?).map_err(|e| parse_err(e.to_string()))?;
        let obs = number(5)?;
        if !obs.is_finite() {
            return Err(parse_err("obs must be finite".into()));
        }
        if !methods.contains(&method) {
            methods.push(method.clone());
        }
        rows.push(ScoreRow::gaussian(&StationId::new(record[0].trim()), date, &method, &dist, obs));
    }
    let rank = |m: &str| methods.iter().position(|x| x == m).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        (&a.station, a.date, rank(&a.method)).cmp(&(&b.station, b.date, rank(&b.method)))
    });
    for pair in rows.windows(2) {
        if (&pair[0].station, pair[0].date, &pair[0].method) == (&pair[1].station, pair[1].date, &pair[1].method) {
            return Err(Error::invalid(format!(
                "duplicate forecast for {} on {} by {}",
                pair[0].station, pair[0].date, pair[0].method
            )));
        }
    }
    Ok(rows)
}

/// Method names in order of first appearance.
fn method_order(rows: &[ScoreRow]) -> Vec<String> {
    let mut methods: Vec<String> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    methods
}

/// Summaries, PIT histograms and pairwise Diebold-Mariano tests.
pub fn verify_forecasts(rows: Vec<ScoreRow>, pit_bins: usize, dm_lag: usize) -> Result<VerificationReport> {
    if rows.is_empty() {
        return Ok(VerificationReport::default());
    }
    let methods = method_order(&rows);
    let mut pairs = Vec::new();
    for (i, a) in methods.iter().enumerate() {
        for b in &methods[i + 1..] {
            pairs.push((a.clone(), b.clone()));
        }
    }
    Ok(VerificationReport {
        methods: summarize_methods(&rows, &methods)?,
        pit_histograms: pit_histograms(&rows, &methods, pit_bins)?,
        diebold_mariano: dm_tests(&rows, &pairs, dm_lag),
        scores: rows,
        ..VerificationReport::default()
    })
}
