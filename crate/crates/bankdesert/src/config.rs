//! Run configuration: the radius schedule, segmentation and threshold
//! parameters, and input column mappings.
//!
//! Configuration comes from an optional TOML file of flat keys, with CLI
//! flags layered on top; anything not given falls back to the defaults
//! below. The canonical string form feeds the run fingerprint, so its
//! layout is part of output determinism.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::{BankSchema, TractSchema};

/// Radii whose full statistics go in the summary table, when present in
/// the schedule.
pub const SUMMARY_RADII: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 20.0];

/// Default radii for the subset-quantile table.
pub const SUBSET_RADII: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 20.0];

/// Default probabilities for the subset-quantile table.
pub const SUBSET_PROBS: [f64; 3] = [0.01, 0.05, 0.10];

/// Tolerance when matching a requested radius against the schedule.
pub const RADIUS_EPS: f64 = 1e-9;

/// Parameters for a full analysis run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Ascending query radii in miles.
    pub radius_schedule: Vec<f64>,
    /// Radii (a subset of the schedule) that get the full adjustment,
    /// desert-labeling, and comparison treatment.
    pub headline_radii: Vec<f64>,
    /// Number of equal-width log-density segments.
    pub segment_count: usize,
    /// Share of each segment labeled a desert, from the bottom of the
    /// adjusted-density ranking.
    pub desert_fraction: f64,
    /// Lower-tail probabilities for the threshold table.
    pub quantile_probs: Vec<f64>,
    /// Two-sided significance level for the deprivation comparison.
    pub significance_level: f64,
    /// Seed for synthetic-landscape generation.
    pub rng_seed: u64,
}

/// Quarter-mile steps from 0.25 through 20.00 (80 radii).
pub fn default_radius_schedule() -> Vec<f64> {
    (1..=80).map(|i| i as f64 * 0.25).collect()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            radius_schedule: default_radius_schedule(),
            headline_radii: vec![2.0, 5.0, 10.0, 20.0],
            segment_count: 10,
            desert_fraction: 0.05,
            quantile_probs: vec![0.05, 0.10],
            significance_level: 0.05,
            rng_seed: 0,
        }
    }
}

impl RunConfig {
    /// Check internal consistency; every public entry point calls this.
    pub fn validate(&self) -> Result<()> {
        if self.radius_schedule.is_empty() {
            return Err(Error::Config("radius schedule is empty".into()));
        }
        if !self
            .radius_schedule
            .iter()
            .all(|r| r.is_finite() && *r > 0.0)
        {
            return Err(Error::Config(
                "radius schedule must be positive and finite".into(),
            ));
        }
        if !self.radius_schedule.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "radius schedule must be strictly ascending".into(),
            ));
        }
        if self.headline_radii.is_empty() {
            return Err(Error::Config("headline radii are empty".into()));
        }
        for &r in &self.headline_radii {
            if radius_index(&self.radius_schedule, r).is_none() {
                return Err(Error::RadiusNotInSchedule(r));
            }
        }
        if self.segment_count < 2 {
            return Err(Error::Config("segment count must be at least 2".into()));
        }
        if !(self.desert_fraction > 0.0 && self.desert_fraction < 1.0) {
            return Err(Error::Config(
                "desert fraction must lie strictly between 0 and 1".into(),
            ));
        }
        if self.quantile_probs.is_empty()
            || !self
                .quantile_probs
                .iter()
                .all(|p| p.is_finite() && *p > 0.0 && *p < 1.0)
            || !self.quantile_probs.windows(2).all(|w| w[0] < w[1])
        {
            return Err(Error::Config(
                "quantile probs must be ascending and strictly between 0 and 1".into(),
            ));
        }
        if !(self.significance_level > 0.0 && self.significance_level < 1.0) {
            return Err(Error::Config(
                "significance level must lie strictly between 0 and 1".into(),
            ));
        }
        Ok(())
    }

    /// Stable textual form of every parameter, hashed into the run
    /// fingerprint.
    pub fn canonical_string(
        &self,
        banks: &BankSchema,
        tracts: &TractSchema,
    ) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        s.push_str(&format!("radius_schedule={}\n", join(&self.radius_schedule)));
        s.push_str(&format!("headline_radii={}\n", join(&self.headline_radii)));
        s.push_str(&format!("segment_count={}\n", self.segment_count));
        s.push_str(&format!("desert_fraction={}\n", self.desert_fraction));
        s.push_str(&format!("quantile_probs={}\n", join(&self.quantile_probs)));
        s.push_str(&format!(
            "significance_level={}\n",
            self.significance_level
        ));
        s.push_str(&format!("rng_seed={}\n", self.rng_seed));
        s.push_str(&format!(
            "bank_columns={},{},{}\n",
            banks.id, banks.lat, banks.lon
        ));
        s.push_str(&format!(
            "tract_columns={},{},{},{},{},{}\n",
            tracts.geoid,
            tracts.lat,
            tracts.lon,
            tracts.population,
            tracts.land_area,
            tracts.deprivation
        ));
        s
    }
}

/// Position of `r` in the schedule, matched to within [`RADIUS_EPS`].
pub fn radius_index(schedule: &[f64], r: f64) -> Option<usize> {
    schedule.iter().position(|&s| (s - r).abs() < RADIUS_EPS)
}

/// Raw TOML document; every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    radius_schedule: Option<Vec<f64>>,
    headline_radii: Option<Vec<f64>>,
    segment_count: Option<usize>,
    desert_fraction: Option<f64>,
    quantile_probs: Option<Vec<f64>>,
    significance_level: Option<f64>,
    rng_seed: Option<u64>,
    bank_id_column: Option<String>,
    bank_lat_column: Option<String>,
    bank_lon_column: Option<String>,
    tract_geoid_column: Option<String>,
    tract_lat_column: Option<String>,
    tract_lon_column: Option<String>,
    tract_population_column: Option<String>,
    tract_land_area_column: Option<String>,
    tract_deprivation_column: Option<String>,
}

/// Everything a run needs to know before touching data.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub run: RunConfig,
    pub bank_schema: BankSchema,
    pub tract_schema: TractSchema,
}

impl Settings {
    /// Load settings from a TOML file, filling gaps with defaults.
    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)?;
        Settings::from_toml(&text)
    }

    /// Parse settings from TOML text, filling gaps with defaults.
    pub fn from_toml(text: &str) -> Result<Settings> {
        let file: ConfigFile = toml::from_str(text)
            .map_err(|e| Error::Config(format!("bad config file: {e}")))?;
        let mut s = Settings::default();
        if let Some(v) = file.radius_schedule {
            s.run.radius_schedule = v;
        }
        if let Some(v) = file.headline_radii {
            s.run.headline_radii = v;
        }
        if let Some(v) = file.segment_count {
            s.run.segment_count = v;
        }
        if let Some(v) = file.desert_fraction {
            s.run.desert_fraction = v;
        }
        if let Some(v) = file.quantile_probs {
            s.run.quantile_probs = v;
        }
        if let Some(v) = file.significance_level {
            s.run.significance_level = v;
        }
        if let Some(v) = file.rng_seed {
            s.run.rng_seed = v;
        }
        if let Some(v) = file.bank_id_column {
            s.bank_schema.id = v;
        }
        if let Some(v) = file.bank_lat_column {
            s.bank_schema.lat = v;
        }
        if let Some(v) = file.bank_lon_column {
            s.bank_schema.lon = v;
        }
        if let Some(v) = file.tract_geoid_column {
            s.tract_schema.geoid = v;
        }
        if let Some(v) = file.tract_lat_column {
            s.tract_schema.lat = v;
        }
        if let Some(v) = file.tract_lon_column {
            s.tract_schema.lon = v;
        }
        if let Some(v) = file.tract_population_column {
            s.tract_schema.population = v;
        }
        if let Some(v) = file.tract_land_area_column {
            s.tract_schema.land_area = v;
        }
        if let Some(v) = file.tract_deprivation_column {
            s.tract_schema.deprivation = v;
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_have_eighty_radii() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.radius_schedule.len(), 80);
        assert_eq!(cfg.radius_schedule[0], 0.25);
        assert_eq!(*cfg.radius_schedule.last().unwrap(), 20.0);
        for r in cfg.headline_radii.iter() {
            assert!(radius_index(&cfg.radius_schedule, *r).is_some());
        }
    }

    #[test]
    fn headline_radius_off_schedule_is_rejected() {
        let cfg = RunConfig {
            headline_radii: vec![2.0, 3.1],
            ..RunConfig::default()
        };
        assert!(matches!(
            cfg.validate().unwrap_err(),
            Error::RadiusNotInSchedule(_)
        ));
    }

    #[test]
    fn descending_schedule_is_rejected() {
        let cfg = RunConfig {
            radius_schedule: vec![2.0, 1.0],
            headline_radii: vec![2.0],
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bad_fraction_is_rejected() {
        for f in [0.0, 1.0, -0.5, 2.0] {
            let cfg = RunConfig {
                desert_fraction: f,
                ..RunConfig::default()
            };
            assert!(cfg.validate().is_err(), "fraction {f}");
        }
    }

    #[test]
    fn toml_overrides_selected_keys() {
        let s = Settings::from_toml(
            r#"
            desert_fraction = 0.1
            rng_seed = 99
            bank_id_column = "cert"
            "#,
        )
        .unwrap();
        assert_eq!(s.run.desert_fraction, 0.1);
        assert_eq!(s.run.rng_seed, 99);
        assert_eq!(s.bank_schema.id, "cert");
        assert_eq!(s.run.segment_count, 10); // untouched default
        s.run.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Settings::from_toml("no_such_key = 1\n").is_err());
    }

    #[test]
    fn canonical_string_is_stable() {
        let s = Settings::default();
        let a = s.run.canonical_string(&s.bank_schema, &s.tract_schema);
        let b = s.run.canonical_string(&s.bank_schema, &s.tract_schema);
        assert_eq!(a, b);
        assert!(a.contains("segment_count=10"));
    }

    #[test]
    fn radius_lookup_tolerates_rounding() {
        let schedule = default_radius_schedule();
        assert_eq!(radius_index(&schedule, 2.0 + 1e-12), Some(7));
        assert_eq!(radius_index(&schedule, 2.1), None);
    }
}
