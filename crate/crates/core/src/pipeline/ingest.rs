//! CSV ingestion: one row per station and date with columns
//! `station_id,date,obs,m1..mM`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::ensemble::{EnsembleForecast, Members, StationId, StationSeries};
use crate::error::{Error, Result};

/// A station left out of the dataset and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub station: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    /// Accepted stations, ordered by id.
    pub stations: Vec<StationSeries>,
    pub rejected: Vec<Rejection>,
}

struct Row {
    line: u64,
    date: NaiveDate,
    obs: Option<f64>,
    members: Option<Vec<f64>>,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan")
}

fn parse_value(field: &str, line: u64, column: &str) -> Result<Option<f64>> {
    if is_missing(field) {
        return Ok(None);
    }
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("column {column}: '{field}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("column {column}: non-finite value '{field}'"),
        });
    }
    Ok(Some(v))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(file)
}

/// Parses and validates a dataset. Malformed rows fail the whole file;
/// stations with missing values, duplicate dates or gaps are rejected
/// individually.
pub fn parse_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.len() < 5 || names[..3] != ["station_id", "date", "obs"] {
        return Err(Error::Schema {
            line: 1,
            message: "header must be station_id,date,obs,m1,...,mM with at least 2 members".into(),
        });
    }
    for (i, name) in names[3..].iter().enumerate() {
        if *name != format!("m{}", i + 1) {
            return Err(Error::Schema {
                line: 1,
                message: format!("expected member column m{}, found '{name}'", i + 1),
            });
        }
    }
    let width = names.len();

    let mut rows: BTreeMap<String, Vec<Row>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(Error::Schema {
                line,
                message: format!(
                    "row has {} members, header declares {}",
                    record.len().saturating_sub(3),
                    width - 3
                ),
            });
        }
        let station = record[0].trim();
        if station.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty station_id".into(),
            });
        }
        let date = NaiveDate::parse_from_str(record[1].trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            message: format!("date '{}': {e}", &record[1]),
        })?;
        let obs = parse_value(&record[2], line, "obs")?;
        let mut members = Some(Vec::with_capacity(width - 3));
        for (j, field) in record.iter().enumerate().skip(3) {
            match parse_value(field, line, names[j])? {
                Some(v) => {
                    if let Some(ms) = members.as_mut() {
                        ms.push(v)
                    }
                }
                None => members = None,
            }
        }
        rows.entry(station.to_string()).or_default().push(Row {
            line,
            date,
            obs,
            members,
        });
    }

    let mut dataset = Dataset::default();
    for (station, mut station_rows) in rows {
        station_rows.sort_by_key(|r| (r.date, r.line));
        match assemble(&station, station_rows) {
            Ok(series) => dataset.stations.push(series),
            Err(reason) => {
                log::warn!("station {station} rejected: {reason}");
                dataset.rejected.push(Rejection { station, reason });
            }
        }
    }
    Ok(dataset)
}

fn assemble(station: &str, rows: Vec<Row>) -> std::result::Result<StationSeries, String> {
    let id = StationId::new(station);
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.date == b.date {
            return Err(format!("duplicate date {} (lines {} and {})", a.date, a.line, b.line));
        }
        if b.date != a.date + chrono::Duration::days(1) {
            return Err(format!("gap between {} and {}", a.date, b.date));
        }
    }
    let mut observations = Vec::with_capacity(rows.len());
    let mut forecasts = Vec::with_capacity(rows.len());
    for row in rows {
        let obs = row
            .obs
            .ok_or_else(|| format!("missing observation on {} (line {})", row.date, row.line))?;
        let members = row
            .members
            .ok_or_else(|| format!("missing member value on {} (line {})", row.date, row.line))?;
        observations.push(obs);
        forecasts.push(EnsembleForecast::new(id.clone(), row.date, members).map_err(|e| e.to_string())?);
    }
    StationSeries::new(id, observations, forecasts).map_err(|e| e.to_string())
}

/// Writes stations in the ingest format, values at 17 significant digits.
pub fn write_dataset(path: &Path, stations: &[StationSeries]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(std::io::BufWriter::new(file), stations).map_err(|e| csv_error(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_records<W: Write>(writer: W, stations: &[StationSeries]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let m = stations.first().map(|s| s.member_count()).unwrap_or(2);
    let mut header = vec!["station_id".to_string(), "date".into(), "obs".into()];
    header.extend((1..=m).map(|i| format!("m{i}")));
    wtr.write_record(&header)?;
    for s in stations {
        for (f, y) in s.forecasts().iter().zip(s.observations()) {
            let mut rec = vec![s.station_id().to_string(), f.date().to_string(), fmt_float(*y)];
            rec.extend(f.members().iter().map(|v| fmt_float(*v)));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Round-trip float formatting: 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}
