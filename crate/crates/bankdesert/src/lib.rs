//! Radial bank-branch density analysis for census tracts.
//!
//! The library measures how many bank branches sit within a schedule of
//! radii around every census-tract centroid, converts the counts to
//! densities, adjusts them for population density, and derives lower-tail
//! "banking desert" thresholds within population-density deciles. A small
//! synthetic-landscape generator supports testing, and the report module
//! drives the whole flow end to end.
//!
//! Module map:
//!
//! * [`ingest`] — CSV parsing and validation for bank points and tracts.
//! * [`spatial`] — haversine distance, the grid index, radial counts.
//! * [`stats`] — quantiles, OLS, Spearman, Welch's t.
//! * [`pipeline`] — decile segmentation, thresholds, desert labeling,
//!   deprivation comparison.
//! * [`synth`] — seeded synthetic landscapes.
//! * [`report`] — end-to-end runs and file emission.

pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod spatial;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
