//! Run configuration with TOML overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artime::{DEFAULT_MAX_ORDER, DEFAULT_PSI_COUNT};
use crate::emos::{DEFAULT_TRAINING_LENGTH, MIN_TRAINING_LENGTH};
use crate::error::{Error, Result};
use crate::pooling::{Objective, SlpSearchGrid};
use crate::verification::DEFAULT_PIT_BINS;

pub const DEFAULT_AR_TRAINING_LENGTH: usize = 90;

/// How the pool weight `w1` and spread `c` are chosen for each verification day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SlpSelection {
    /// Per station: the grid cell with the best mean score over the
    /// `window` days preceding the forecast day.
    Rolling { window: usize },
    /// One cell for all stations and days, chosen on the whole verification
    /// period. Scores are in-sample for the two pool parameters.
    Pooled,
    Fixed { weight: f64, spread: f64 },
}

impl Default for SlpSelection {
    fn default() -> Self {
        SlpSelection::Rolling {
            window: DEFAULT_TRAINING_LENGTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Rolling window `T1` for the AR error models.
    pub ar_training_length: usize,
    /// Rolling window for local EMOS.
    pub emos_training_length: usize,
    pub max_ar_order: usize,
    pub psi_count: usize,
    /// Single shared EMOS member weight.
    pub exchangeable: bool,
    pub grid: SlpSearchGrid,
    pub selection: SlpSelection,
    pub pit_bins: usize,
    /// Lag `h` of the Diebold-Mariano statistic.
    pub dm_lag: usize,
    /// Seeds the rank-histogram tie breaking.
    pub seed: u64,
    /// Restricts the run to these stations when non-empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stations: Vec<String>,
}

impl RunConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            ar_training_length: DEFAULT_AR_TRAINING_LENGTH,
            emos_training_length: DEFAULT_TRAINING_LENGTH,
            max_ar_order: DEFAULT_MAX_ORDER,
            psi_count: DEFAULT_PSI_COUNT,
            exchangeable: true,
            grid: SlpSearchGrid::default(),
            selection: SlpSelection::default(),
            pit_bins: DEFAULT_PIT_BINS,
            dm_lag: 1,
            seed,
            stations: Vec::new(),
        }
    }

    pub fn objective(&self) -> Objective {
        self.grid.objective
    }

    /// First day index carrying AR-modified forecasts.
    pub fn first_modified_day(&self) -> usize {
        self.ar_training_length
    }

    /// First verification day index, `T1 + emos_training_length`.
    pub fn first_verification_day(&self) -> usize {
        self.ar_training_length + self.emos_training_length
    }

    /// Number of verification days `T - T1 - emos_training_length` of a
    /// series with `days` days.
    pub fn verification_days(&self, days: usize) -> usize {
        days.saturating_sub(self.first_verification_day())
    }

    pub fn validate(&self) -> Result<()> {
        let t1 = self.ar_training_length;
        if t1 < self.max_ar_order + 2 {
            return Err(Error::Config(format!(
                "ar_training_length {t1} must be at least max_ar_order + 2 = {}",
                self.max_ar_order + 2
            )));
        }
        if self.emos_training_length < MIN_TRAINING_LENGTH {
            return Err(Error::Config(format!(
                "emos_training_length must be at least {MIN_TRAINING_LENGTH}, got {}",
                self.emos_training_length
            )));
        }
        if self.psi_count == 0 {
            return Err(Error::Config("psi_count must be positive".into()));
        }
        if self.pit_bins == 0 {
            return Err(Error::Config("pit_bins must be positive".into()));
        }
        if self.dm_lag == 0 {
            return Err(Error::Config("dm_lag must be positive".into()));
        }
        self.grid
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        match self.selection {
            SlpSelection::Rolling { window } => {
                let limit = self.emos_training_length.min(t1);
                if window == 0 || window > limit {
                    return Err(Error::Config(format!(
                        "rolling SLP window must lie in 1..={limit}, got {window}"
                    )));
                }
            }
            SlpSelection::Fixed { weight, spread } => {
                if !(0.0..=1.0).contains(&weight) || !(spread > 0.0 && spread.is_finite()) {
                    return Err(Error::Config(format!(
                        "fixed SLP parameters out of range: weight {weight}, spread {spread}"
                    )));
                }
            }
            SlpSelection::Pooled => {}
        }
        Ok(())
    }

    /// Applies the keys of a TOML document on top of `self`. Keys absent
    /// from the document keep their current value.
    pub fn merge_toml(&self, text: &str) -> Result<Self> {
        let overrides: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut base = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        merge_tables(&mut base, overrides);
        base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn merge_file(&self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.merge_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn merge_tables(base: &mut toml::Table, overrides: toml::Table) {
    for (key, value) in overrides {
        match (base.get_mut(&key), value) {
            // a new selection mode replaces the old one wholesale
            (Some(toml::Value::Table(inner)), toml::Value::Table(over)) if key != "selection" => {
                merge_tables(inner, over)
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::new(7);
        cfg.validate().unwrap();
        assert_eq!(cfg.verification_days(453), 338);
        assert_eq!(cfg.grid.cells().len(), 99);
    }

    #[test]
    fn window_constraints() {
        let mut cfg = RunConfig::new(1);
        cfg.ar_training_length = 16;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = RunConfig::new(1);
        cfg.emos_training_length = 4;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::new(1);
        cfg.selection = SlpSelection::Rolling { window: 26 };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_overrides() {
        let cfg = RunConfig::new(1)
            .merge_toml(
                "ar_training_length = 60\nseed = 9\n[grid]\nobjective = \"dss\"\n\
                 [selection]\nmode = \"fixed\"\nweight = 0.5\nspread = 0.9\n",
            )
            .unwrap();
        assert_eq!(cfg.ar_training_length, 60);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.grid.objective, Objective::Dss);
        assert_eq!(cfg.grid.weight_values.len(), 11);
        assert_eq!(
            cfg.selection,
            SlpSelection::Fixed {
                weight: 0.5,
                spread: 0.9
            }
        );
        assert!(RunConfig::new(1).merge_toml("bogus = 1").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::new(3);
        let back = RunConfig::new(0).merge_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
