mod common;

use std::collections::BTreeMap;

use aremos::pipeline::{
    emit_report, generate_synthetic, parse_dataset, read_dataset, run_experiment, run_stations, sweep_t1,
    write_dataset, RunConfig, SlpSelection, SyntheticSpec, VerificationReport, AR_EMOS, EMOS, SLP,
};
use aremos::Error;

fn small(stations: usize, days: usize, seed: u64) -> Vec<aremos::ensemble::StationSeries> {
    let spec = SyntheticSpec {
        stations,
        days,
        members: 20,
        ..SyntheticSpec::default()
    };
    generate_synthetic(&spec, seed).unwrap()
}

fn rows_by_station(report: &VerificationReport) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in &report.scores {
        out.entry(r.station.to_string()).or_default().push(format!("{r:?}"));
    }
    out
}

#[test]
fn degenerate_pool_equals_emos_exactly() {
    let data = small(3, 140, 1);
    let config = RunConfig {
        selection: SlpSelection::Fixed {
            weight: 1.0,
            spread: 1.0,
        },
        ..RunConfig::new(1)
    };
    let report = run_experiment(&data, &config).unwrap();
    let emos: Vec<_> = report.rows_for(EMOS).collect();
    let slp: Vec<_> = report.rows_for(SLP).collect();
    assert_eq!(emos.len(), slp.len());
    for (e, s) in emos.iter().zip(&slp) {
        assert_eq!((e.mean, e.variance, e.crps, e.dss, e.pit, e.abs_error), (s.mean, s.variance, s.crps, s.dss, s.pit, s.abs_error));
    }
    assert_eq!(report.method(EMOS).unwrap().crps, report.method(SLP).unwrap().crps);
}

#[test]
fn verification_period_accounting() {
    let data = small(2, 453, 2);
    let config = RunConfig::new(1);
    assert_eq!(config.verification_days(453), 338);
    let report = run_experiment(&data, &config).unwrap();
    for m in [EMOS, AR_EMOS, SLP] {
        assert_eq!(report.method(m).unwrap().cases, 2 * 338);
    }
    assert_eq!(report.deterministic_rows.len(), 2 * 363);
    assert_eq!(report.order_frequency.as_ref().unwrap().total(), 2 * 363);
    let first = report.rows_for(EMOS).map(|r| r.date).min().unwrap();
    assert_eq!(first, data[0].date(90 + 25));
}

#[test]
fn removing_a_station_leaves_the_others_untouched() {
    let data = small(4, 150, 3);
    for selection in [SlpSelection::default(), SlpSelection::Fixed { weight: 0.4, spread: 1.1 }] {
        let config = RunConfig {
            selection,
            ..RunConfig::new(1)
        };
        let all = rows_by_station(&run_experiment(&data, &config).unwrap());
        let fewer = rows_by_station(&run_experiment(&data[1..], &config).unwrap());
        assert_eq!(fewer.len(), 3);
        for (station, rows) in &fewer {
            assert_eq!(rows, &all[station], "station {station}");
        }
    }
}

#[test]
fn thread_count_does_not_change_the_report() {
    let data = small(5, 140, 4);
    let config = RunConfig::new(9);
    let dir = tempfile::tempdir().unwrap();
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let report = pool.install(|| run_experiment(&data, &config)).unwrap();
        emit_report(&report, &dir.path().join(threads.to_string())).unwrap();
    }
    for name in ["scores.csv", "summary.csv", "deterministic.csv", "histograms.json", "tests.json", "gridtable.csv", "config.toml"] {
        let a = std::fs::read(dir.path().join("1").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("3").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn summary_lists_methods_then_deterministic_forecasts() {
    let data = small(2, 130, 5);
    let dir = tempfile::tempdir().unwrap();
    emit_report(&run_experiment(&data, &RunConfig::new(1)).unwrap(), dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let first_column: Vec<&str> = text.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        first_column,
        [
            "method",
            "EMOS",
            "AR-EMOS",
            "SLP",
            "raw-mean",
            "modified-mean",
            "mean-of-modified",
            "raw-median",
            "modified-median",
            "median-of-modified"
        ]
    );
    let tests: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("tests.json")).unwrap()).unwrap();
    assert_eq!(tests["diebold_mariano"].as_array().unwrap().len(), 3);
}

#[test]
fn underdispersed_members_give_a_u_shaped_rank_histogram() {
    let report = run_experiment(&small(4, 200, 6), &RunConfig::new(2)).unwrap();
    let counts = &report.rank_histogram.as_ref().unwrap().counts;
    assert_eq!(counts.len(), 21);
    let middle: usize = counts[8..13].iter().sum::<usize>() / 5;
    assert!(counts[0] > 2 * middle && counts[20] > 2 * middle, "{counts:?}");
}

#[test]
fn white_error_process_passes_ljung_box_at_the_nominal_rate() {
    let spec = SyntheticSpec {
        stations: 40,
        days: 160,
        members: 10,
        error_coefficients: vec![0.0],
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec, 7).unwrap();
    let runs = run_stations(&data, &RunConfig::new(1)).unwrap();
    let rejected = runs
        .iter()
        .filter(|r| r.ljung_box.result.unwrap().p_value < 0.05)
        .count();
    // nominal 2 of 40
    assert!(rejected <= 7, "{rejected}/40 stations reject");

    let persistent = generate_synthetic(&SyntheticSpec { error_coefficients: vec![0.8], ..spec }, 7).unwrap();
    let runs = run_stations(&persistent, &RunConfig::new(1)).unwrap();
    let rejected = runs
        .iter()
        .filter(|r| r.ljung_box.result.unwrap().p_value < 0.05)
        .count();
    assert!(rejected >= 30, "{rejected}/40 stations reject");
}

#[test]
fn short_series_are_refused() {
    let data = small(1, 115, 8);
    assert!(matches!(
        run_experiment(&data, &RunConfig::new(1)),
        Err(Error::InsufficientHistory { .. })
    ));
}

#[test]
fn unknown_station_filter_is_a_config_error() {
    let data = small(2, 130, 9);
    let config = RunConfig {
        stations: vec!["nope".into()],
        ..RunConfig::new(1)
    };
    assert!(matches!(run_experiment(&data, &config), Err(Error::Config(_))));
}

#[test]
fn synthetic_data_round_trips_through_csv() {
    let data = small(3, 30, 10);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    write_dataset(&path, &data).unwrap();
    let back = read_dataset(&path).unwrap();
    assert!(back.rejected.is_empty());
    assert_eq!(back.stations, data);
    assert_eq!(generate_synthetic(&SyntheticSpec::default(), 3).unwrap()[5], generate_synthetic(&SyntheticSpec::default(), 3).unwrap()[5]);
    assert_ne!(small(1, 30, 10), small(1, 30, 11));
}

#[test]
fn ingest_rejects_incomplete_stations() {
    let text = "station_id,date,obs,m1,m2\n\
        A,2011-01-01,1.0,0.5,1.5\n\
        A,2011-01-02,NA,0.5,1.5\n\
        B,2011-01-02,2.0,1.0,2.0\n\
        B,2011-01-01,2.5,1.0,2.0\n\
        C,2011-01-01,1.0,0.5,1.5\n\
        C,2011-01-03,1.0,0.5,1.5\n\
        D,2011-01-01,1.0,,1.5\n";
    let data = parse_dataset(text.as_bytes()).unwrap();
    let accepted: Vec<&str> = data.stations.iter().map(|s| s.station_id().as_str()).collect();
    assert_eq!(accepted, ["B"]);
    assert_eq!(data.stations[0].observations(), &[2.5, 2.0]);
    let rejected: Vec<&str> = data.rejected.iter().map(|r| r.station.as_str()).collect();
    assert_eq!(rejected, ["A", "C", "D"]);
}

#[test]
fn ingest_reports_bad_lines() {
    let narrow = "station_id,date,obs,m1\nA,2011-01-01,1,1\n";
    assert!(matches!(parse_dataset(narrow.as_bytes()), Err(Error::Schema { line: 1, .. })));
    let ragged = "station_id,date,obs,m1,m2\nA,2011-01-01,1,1,2\nA,2011-01-02,1,1\n";
    assert!(matches!(parse_dataset(ragged.as_bytes()), Err(Error::Schema { line: 3, .. })));
    let word = "station_id,date,obs,m1,m2\nA,2011-01-01,warm,1,2\n";
    assert!(matches!(parse_dataset(word.as_bytes()), Err(Error::Parse { line: 2, .. })));
    let date = "station_id,date,obs,m1,m2\nA,01/02/2011,1,1,2\n";
    assert!(matches!(parse_dataset(date.as_bytes()), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn config_file_overrides_and_round_trips() {
    let base = RunConfig::new(4);
    let merged = base
        .merge_toml("emos_training_length = 30\n[selection]\nmode = \"pooled\"\n[grid]\nobjective = \"dss\"\n")
        .unwrap();
    assert_eq!(merged.emos_training_length, 30);
    assert_eq!(merged.selection, SlpSelection::Pooled);
    assert_eq!(merged.grid.weight_values, base.grid.weight_values);
    assert_eq!(merged.seed, 4);
    let again = RunConfig::new(0).merge_toml(&merged.to_toml().unwrap()).unwrap();
    assert_eq!(again, merged);
    assert!(base.merge_toml("emos_window = 3\n").is_err());
    let bad = RunConfig {
        selection: SlpSelection::Rolling { window: 40 },
        ..base
    };
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
}

#[test]
fn sweep_reports_every_length() {
    let data = small(2, 260, 12);
    let rows = sweep_t1(&data, &[30, 60, 90], 15, true).unwrap();
    assert_eq!(rows.iter().map(|r| r.ar_training_length).collect::<Vec<_>>(), [30, 60, 90]);
    assert!(rows.iter().all(|r| r.cases == 2 * (260 - 90)));
    assert!(rows.iter().all(|r| r.mae_modified_mean < r.mae_raw_mean));
}
