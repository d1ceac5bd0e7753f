use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aremos::pipeline::{self, RunConfig, SlpSelection, SyntheticSpec};
use aremos::pooling::Objective;
use aremos::{Error, Result};

#[derive(Parser)]
#[command(name = "aremos", version, about = "AR-modified ensemble postprocessing and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full rolling-window experiment with report files.
    Run {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// MAE of the AR-modified ensemble mean across AR training lengths.
    SweepT1 {
        #[arg(long)]
        input: PathBuf,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [30, 60, 90, 120, 150, 180, 210])]
        t1: Vec<usize>,
        #[arg(long, default_value_t = aremos::artime::DEFAULT_MAX_ORDER)]
        max_ar_order: usize,
        /// Score every length on the days after the longest one.
        #[arg(long)]
        common_period: bool,
        #[arg(long = "station")]
        stations: Vec<String>,
    },
    /// Generate a synthetic dataset in the ingest format.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// TOML file with SyntheticSpec fields; flags below override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        stations: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        members: Option<usize>,
        #[arg(long)]
        dispersion: Option<f64>,
        #[arg(long)]
        bias: Option<f64>,
        /// AR coefficients of the observation error process.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        ar_coefficients: Option<Vec<f64>>,
        #[arg(long)]
        innovation_variance: Option<f64>,
    },
    /// Score table of every SLP grid cell over the verification period.
    Gridtable {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Scores for precomputed Gaussian forecasts
    /// (`station_id,date,method,mean,variance,obs`).
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = aremos::verification::DEFAULT_PIT_BINS)]
        pit_bins: usize,
        #[arg(long, default_value_t = 1)]
        dm_lag: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionMode {
    Rolling,
    Pooled,
    Fixed,
}

#[derive(Args)]
struct RunArgs {
    /// Seeds rank-histogram tie breaking; required here or in --config.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file whose keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ar_training_length: Option<usize>,
    #[arg(long)]
    emos_training_length: Option<usize>,
    #[arg(long)]
    max_ar_order: Option<usize>,
    #[arg(long)]
    psi_count: Option<usize>,
    /// One EMOS weight per member instead of a shared weight.
    #[arg(long)]
    per_member: bool,
    #[arg(long)]
    objective: Option<Objective>,
    #[arg(long, value_enum)]
    selection: Option<SelectionMode>,
    /// Window of the rolling SLP selection.
    #[arg(long)]
    slp_window: Option<usize>,
    /// Pool weight of EMOS under fixed selection.
    #[arg(long)]
    weight: Option<f64>,
    /// Spread under fixed selection.
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    pit_bins: Option<usize>,
    #[arg(long)]
    dm_lag: Option<usize>,
    #[arg(long = "station")]
    stations: Vec<String>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::new(self.seed.unwrap_or_default());
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        set!(ar_training_length);
        set!(emos_training_length);
        set!(max_ar_order);
        set!(psi_count);
        set!(pit_bins);
        set!(dm_lag);
        if self.per_member {
            cfg.exchangeable = false;
        }
        if let Some(obj) = self.objective {
            cfg.grid.objective = obj;
        }
        cfg.selection = match self.selection {
            Some(SelectionMode::Pooled) => SlpSelection::Pooled,
            Some(SelectionMode::Fixed) => SlpSelection::Fixed {
                weight: self.weight.unwrap_or(0.5),
                spread: self.spread.unwrap_or(1.0),
            },
            Some(SelectionMode::Rolling) | None => SlpSelection::Rolling {
                window: self.slp_window.unwrap_or(cfg.emos_training_length),
            },
        };
        cfg.stations = self.stations.clone();

        let mut seed_given = self.seed.is_some();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            seed_given |= text
                .parse::<toml::Table>()
                .map(|t| t.contains_key("seed"))
                .unwrap_or(false);
            cfg = cfg.merge_toml(&text)?;
        }
        if !seed_given {
            return Err(Error::Config("--seed is required (or a seed key in --config)".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load(input: &Path) -> Result<pipeline::Dataset> {
    let dataset = pipeline::read_dataset(input)?;
    for r in &dataset.rejected {
        eprintln!("rejected station {}: {}", r.station, r.reason);
    }
    log::info!(
        "{} stations accepted, {} rejected",
        dataset.stations.len(),
        dataset.rejected.len()
    );
    Ok(dataset)
}

fn print_summary(report: &pipeline::VerificationReport) {
    // a closed stdout (e.g. piped into `head`) is not an error worth reporting
    let _ = write_summary(&mut std::io::stdout().lock(), report);
}

fn write_summary(out: &mut impl Write, report: &pipeline::VerificationReport) -> std::io::Result<()> {
    if report.is_empty() {
        return writeln!(out, "empty verification period");
    }
    writeln!(
        out,
        "{:<20} {:>7} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "method", "cases", "MAE", "CRPS", "DSS", "Var(PIT)", "RMV"
    )?;
    for m in &report.methods {
        let pit = m.pit_variance.map(|v| format!("{v:9.4}")).unwrap_or_else(|| format!("{:>9}", "-"));
        writeln!(
            out,
            "{:<20} {:>7} {:>9.4} {:>9.4} {:>9.4} {} {:>9.4}",
            m.method, m.cases, m.mae, m.crps, m.dss, pit, m.rmv
        )?;
    }
    for m in &report.deterministic {
        writeln!(out, "{:<20} {:>7} {:>9.4}", m.forecast, m.cases, m.mae)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { input, out, run } => {
            let config = run.config()?;
            let dataset = load(&input)?;
            let report = pipeline::run_dataset(&dataset, &config)?;
            pipeline::emit_report(&report, &out)?;
            print_summary(&report);
        }
        Command::SweepT1 {
            input,
            out,
            t1,
            max_ar_order,
            common_period,
            stations,
        } => {
            let dataset = load(&input)?;
            let mut filter = RunConfig::new(0);
            filter.stations = stations;
            let selected: Vec<_> = pipeline::run::select_stations(&dataset.stations, &filter)?
                .into_iter()
                .cloned()
                .collect();
            let rows = pipeline::sweep_t1(&selected, &t1, max_ar_order, common_period)?;
            let mut text = String::from("ar_training_length,cases,mae_raw_mean,mae_modified_mean\n");
            for r in &rows {
                text.push_str(&format!(
                    "{},{},{:.16e},{:.16e}\n",
                    r.ar_training_length, r.cases, r.mae_raw_mean, r.mae_modified_mean
                ));
            }
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?,
                None => {
                    let _ = std::io::stdout().lock().write_all(text.as_bytes());
                }
            }
        }
        Command::Synth {
            out,
            seed,
            spec,
            stations,
            days,
            members,
            dispersion,
            bias,
            ar_coefficients,
            innovation_variance,
        } => {
            let mut s = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io { path, source: e })?;
                    toml::from_str::<SyntheticSpec>(&text).map_err(|e| Error::Config(e.to_string()))?
                }
                None => SyntheticSpec::default(),
            };
            s.stations = stations.unwrap_or(s.stations);
            s.days = days.unwrap_or(s.days);
            s.members = members.unwrap_or(s.members);
            s.dispersion = dispersion.unwrap_or(s.dispersion);
            s.bias = bias.unwrap_or(s.bias);
            s.error_coefficients = ar_coefficients.unwrap_or(s.error_coefficients);
            s.error_innovation_variance = innovation_variance.unwrap_or(s.error_innovation_variance);
            let data = pipeline::generate_synthetic(&s, seed)?;
            pipeline::write_dataset(&out, &data)?;
        }
        Command::Gridtable { input, out, run } => {
            let config = run.config()?;
            let dataset = load(&input)?;
            let runs = pipeline::run_stations(&dataset.stations, &config)?;
            let grid = pipeline::pooled_grid(&runs, &config)?;
            pipeline::write_grid_table(grid.as_ref(), &out)?;
            match grid {
                Some(g) => println!(
                    "optimum w1={} c={} crps={:.6} dss={:.6}",
                    g.best.weight, g.best.spread, g.best.crps, g.best.dss
                ),
                None => println!("empty verification period"),
            }
        }
        Command::Verify {
            input,
            out,
            pit_bins,
            dm_lag,
        } => {
            if pit_bins == 0 || dm_lag == 0 {
                return Err(Error::Config("pit_bins and dm_lag must be positive".into()));
            }
            let rows = pipeline::read_forecasts(&input)?;
            let report = pipeline::verify_forecasts(rows, pit_bins, dm_lag)?;
            pipeline::emit_report(&report, &out)?;
            print_summary(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
