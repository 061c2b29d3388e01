//! Input parsing and validation for bank points and census tracts.
//!
//! Both inputs are delimited text with a header row. Column names are
//! explicit configuration ([`BankSchema`], [`TractSchema`]) — nothing is
//! sniffed. Rows that fail validation are dropped and counted, never
//! repaired; a duplicate id is a hard error, and if more than half of the
//! data rows drop the whole parse fails as a schema mismatch.

use std::collections::HashSet;
use std::io::Read;

use crate::error::{Error, Result};

/// Latitude cap for all ingested coordinates, in degrees. The analysis
/// covers the mid-latitudes; the grid index is not built for near-polar
/// geometry, so anything beyond this band is rejected as out of range.
pub const MAX_ABS_LAT_DEG: f64 = 72.0;

/// Longitude cap, in degrees. The one-degree margin keeps every query
/// circle (at any latitude within the band above, for radii past 20 miles)
/// clear of the ±180° antimeridian, which the index does not wrap.
pub const MAX_ABS_LON_DEG: f64 = 179.0;

/// Log population density assigned to zero-population tracts.
pub const ZERO_POP_LOG_DENSITY: f64 = -10.0;

/// A bank branch location.
#[derive(Debug, Clone, PartialEq)]
pub struct BankPoint {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

/// A census tract: centroid, population, land area, and a deprivation
/// score (higher = more deprived).
#[derive(Debug, Clone, PartialEq)]
pub struct TractRecord {
    pub geoid: String,
    pub lat: f64,
    pub lon: f64,
    pub population: f64,
    pub land_area_sqmi: f64,
    pub deprivation: f64,
}

/// Natural log of population density, with a flag for the zero-population
/// clamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPopDensity {
    pub value: f64,
    pub clamped: bool,
}

/// ln(population / land area), with zero population pinned to the
/// [`ZERO_POP_LOG_DENSITY`] sentinel.
pub fn log_pop_density(population: f64, land_area_sqmi: f64) -> LogPopDensity {
    debug_assert!(land_area_sqmi > 0.0, "land area must be positive");
    debug_assert!(population >= 0.0, "population must be nonnegative");
    if population == 0.0 {
        LogPopDensity {
            value: ZERO_POP_LOG_DENSITY,
            clamped: true,
        }
    } else {
        LogPopDensity {
            value: (population / land_area_sqmi).ln(),
            clamped: false,
        }
    }
}

/// Column names for the bank file.
#[derive(Debug, Clone)]
pub struct BankSchema {
    pub id: String,
    pub lat: String,
    pub lon: String,
}

impl Default for BankSchema {
    fn default() -> Self {
        BankSchema {
            id: "id".into(),
            lat: "latitude".into(),
            lon: "longitude".into(),
        }
    }
}

/// Column names for the tract file.
#[derive(Debug, Clone)]
pub struct TractSchema {
    pub geoid: String,
    pub lat: String,
    pub lon: String,
    pub population: String,
    pub land_area: String,
    pub deprivation: String,
}

impl Default for TractSchema {
    fn default() -> Self {
        TractSchema {
            geoid: "geoid".into(),
            lat: "centroid_lat".into(),
            lon: "centroid_lon".into(),
            population: "population".into(),
            land_area: "land_area_sqmi".into(),
            deprivation: "deprivation".into(),
        }
    }
}

/// Parse outcome: the surviving records in input order plus the count of
/// dropped rows.
#[derive(Debug)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub dropped: usize,
}

fn coord_in_range(lat: f64, lon: f64) -> bool {
    lat.is_finite()
        && lon.is_finite()
        && lat.abs() <= MAX_ABS_LAT_DEG
        && lon.abs() <= MAX_ABS_LON_DEG
}

fn parse_field(record: &csv::StringRecord, idx: usize) -> Option<f64> {
    let raw = record.get(idx)?.trim();
    if raw.is_empty() {
        return None;
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

fn header_index(headers: &csv::StringRecord, name: &str, label: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn {
            file: label.to_string(),
            column: name.to_string(),
        })
}

fn check_drop_rate(label: &str, dropped: usize, total: usize) -> Result<()> {
    if dropped * 2 > total {
        return Err(Error::SchemaMismatch {
            file: label.to_string(),
            dropped,
            total,
        });
    }
    Ok(())
}

/// Parse bank points from `reader`, keeping input order.
///
/// Rows with a missing id or a missing/unparseable/out-of-range coordinate
/// are dropped and counted. A repeated id fails the parse outright.
pub fn parse_banks(
    reader: impl Read,
    schema: &BankSchema,
    label: &str,
) -> Result<Parsed<BankPoint>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_idx = header_index(&headers, &schema.id, label)?;
    let lat_idx = header_index(&headers, &schema.lat, label)?;
    let lon_idx = header_index(&headers, &schema.lon, label)?;

    let mut records = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut dropped = 0usize;
    let mut total = 0usize;
    for row in rdr.records() {
        total += 1;
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        let id = row.get(id_idx).map(str::trim).unwrap_or("");
        let lat = parse_field(&row, lat_idx);
        let lon = parse_field(&row, lon_idx);
        match (id.is_empty(), lat, lon) {
            (false, Some(lat), Some(lon)) if coord_in_range(lat, lon) => {
                if !seen.insert(id.to_string()) {
                    return Err(Error::DuplicateId {
                        file: label.to_string(),
                        id: id.to_string(),
                    });
                }
                records.push(BankPoint {
                    id: id.to_string(),
                    lat,
                    lon,
                });
            }
            _ => dropped += 1,
        }
    }
    check_drop_rate(label, dropped, total)?;
    Ok(Parsed { records, dropped })
}

/// Parse tract records from `reader`, keeping input order.
///
/// A valid row needs a geoid, an in-range centroid, a nonnegative
/// population, a positive land area, and a finite deprivation score;
/// anything else is dropped and counted. A repeated geoid fails the
/// parse outright.
pub fn parse_tracts(
    reader: impl Read,
    schema: &TractSchema,
    label: &str,
) -> Result<Parsed<TractRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let geoid_idx = header_index(&headers, &schema.geoid, label)?;
    let lat_idx = header_index(&headers, &schema.lat, label)?;
    let lon_idx = header_index(&headers, &schema.lon, label)?;
    let pop_idx = header_index(&headers, &schema.population, label)?;
    let area_idx = header_index(&headers, &schema.land_area, label)?;
    let depr_idx = header_index(&headers, &schema.deprivation, label)?;

    let mut records = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut dropped = 0usize;
    let mut total = 0usize;
    for row in rdr.records() {
        total += 1;
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        let geoid = row.get(geoid_idx).map(str::trim).unwrap_or("");
        let lat = parse_field(&row, lat_idx);
        let lon = parse_field(&row, lon_idx);
        let population = parse_field(&row, pop_idx);
        let land_area = parse_field(&row, area_idx);
        let deprivation = parse_field(&row, depr_idx);
        match (geoid.is_empty(), lat, lon, population, land_area, deprivation) {
            (false, Some(lat), Some(lon), Some(pop), Some(area), Some(depr))
                if coord_in_range(lat, lon) && pop >= 0.0 && area > 0.0 =>
            {
                if !seen.insert(geoid.to_string()) {
                    return Err(Error::DuplicateId {
                        file: label.to_string(),
                        id: geoid.to_string(),
                    });
                }
                records.push(TractRecord {
                    geoid: geoid.to_string(),
                    lat,
                    lon,
                    population: pop,
                    land_area_sqmi: area,
                    deprivation: depr,
                });
            }
            _ => dropped += 1,
        }
    }
    check_drop_rate(label, dropped, total)?;
    Ok(Parsed { records, dropped })
}
