//! Synthetic landscapes: clustered bank points plus tract centroids with a
//! deprivation signal tied to local bank density.
//!
//! Generation is a single sequential pass over one seeded stream, so a
//! given spec always produces byte-identical data:
//!
//! 1. cluster centers, uniform in the box
//! 2. per cluster, a Poisson count of banks displaced by a Gaussian
//! 3. uniform background banks
//! 4. tract centroids with uniform log population density
//! 5. deprivation from bank density at [`DEPRIVATION_RADIUS_MILES`]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::ingest::{BankPoint, TractRecord};
use crate::spatial::{circle_area_sq_miles, GeoIndex, MILES_PER_LAT_DEG};

/// Radius the deprivation signal reads bank density at.
pub const DEPRIVATION_RADIUS_MILES: f64 = 2.0;

/// Parameters of a synthetic landscape.
#[derive(Debug, Clone)]
pub struct LandscapeSpec {
    pub seed: u64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    /// Bank clusters (think: towns).
    pub n_clusters: usize,
    /// Poisson mean of banks per cluster.
    pub cluster_mean_points: f64,
    /// Gaussian displacement of banks around their cluster center, miles.
    pub cluster_sd_miles: f64,
    /// Banks scattered uniformly over the box.
    pub background_points: usize,
    pub n_tracts: usize,
    /// Range tract log population densities are drawn from.
    pub log_density_min: f64,
    pub log_density_max: f64,
    /// Deprivation per unit of bank density; negative makes dense areas
    /// better off.
    pub deprivation_coeff: f64,
    pub deprivation_noise_sd: f64,
}

impl Default for LandscapeSpec {
    fn default() -> Self {
        LandscapeSpec {
            seed: 0,
            lat_min: 38.0,
            lat_max: 42.0,
            lon_min: -92.0,
            lon_max: -86.0,
            n_clusters: 12,
            cluster_mean_points: 40.0,
            cluster_sd_miles: 3.0,
            background_points: 150,
            n_tracts: 400,
            log_density_min: -2.0,
            log_density_max: 9.0,
            deprivation_coeff: -0.5,
            deprivation_noise_sd: 0.1,
        }
    }
}

impl LandscapeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::LandscapeSpec(msg.to_string()));
        // finiteness first: the range checks below lean on it
        for v in [
            self.lat_min,
            self.lat_max,
            self.lon_min,
            self.lon_max,
            self.cluster_mean_points,
            self.cluster_sd_miles,
            self.log_density_min,
            self.log_density_max,
            self.deprivation_coeff,
            self.deprivation_noise_sd,
        ] {
            if !v.is_finite() {
                return bad("spec values must be finite");
            }
        }
        if self.lat_min >= self.lat_max || self.lon_min >= self.lon_max {
            return bad("bounding box must have positive extent");
        }
        // stay clear of the ingest coordinate limits
        if self.lat_min < -71.5 || self.lat_max > 71.5 {
            return bad("latitude range must stay within +/-71.5");
        }
        if self.lon_min < -179.0 || self.lon_max > 179.0 {
            return bad("longitude range must stay within +/-179");
        }
        if self.n_tracts == 0 {
            return bad("need at least one tract");
        }
        if self.cluster_mean_points < 0.0 || self.cluster_sd_miles < 0.0 {
            return bad("cluster parameters must be nonnegative");
        }
        if self.log_density_min >= self.log_density_max {
            return bad("log density range must be ascending");
        }
        if self.deprivation_noise_sd < 0.0 {
            return bad("noise standard deviation must be nonnegative");
        }
        Ok(())
    }
}

/// A generated landscape, ready for the pipeline or for CSV export.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub banks: Vec<BankPoint>,
    pub tracts: Vec<TractRecord>,
}

/// Generate the landscape described by `spec`.
pub fn generate(spec: &LandscapeSpec) -> Result<Landscape> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut banks: Vec<BankPoint> = Vec::new();
    let push_bank = |banks: &mut Vec<BankPoint>, lat: f64, lon: f64| {
        let id = format!("B{:06}", banks.len());
        banks.push(BankPoint { id, lat, lon });
    };

    // towns first: centers, then a Poisson number of displaced banks each
    if spec.n_clusters > 0 && spec.cluster_mean_points > 0.0 {
        let poisson = Poisson::new(spec.cluster_mean_points)
            .map_err(|e| Error::LandscapeSpec(format!("poisson: {e}")))?;
        let normal = Normal::new(0.0, spec.cluster_sd_miles)
            .map_err(|e| Error::LandscapeSpec(format!("normal: {e}")))?;
        for _ in 0..spec.n_clusters {
            let c_lat = rng.random_range(spec.lat_min..spec.lat_max);
            let c_lon = rng.random_range(spec.lon_min..spec.lon_max);
            let count = poisson.sample(&mut rng) as usize;
            for _ in 0..count {
                let (mut lat, mut lon) = (f64::NAN, f64::NAN);
                // resample displaced points that leave the box; clamp as a
                // last resort so counts stay exact
                for _ in 0..20 {
                    let dlat = normal.sample(&mut rng) / MILES_PER_LAT_DEG;
                    let dlon = normal.sample(&mut rng)
                        / (MILES_PER_LAT_DEG * c_lat.to_radians().cos());
                    lat = c_lat + dlat;
                    lon = c_lon + dlon;
                    if lat >= spec.lat_min
                        && lat <= spec.lat_max
                        && lon >= spec.lon_min
                        && lon <= spec.lon_max
                    {
                        break;
                    }
                }
                lat = lat.clamp(spec.lat_min, spec.lat_max);
                lon = lon.clamp(spec.lon_min, spec.lon_max);
                push_bank(&mut banks, lat, lon);
            }
        }
    }

    for _ in 0..spec.background_points {
        let lat = rng.random_range(spec.lat_min..spec.lat_max);
        let lon = rng.random_range(spec.lon_min..spec.lon_max);
        push_bank(&mut banks, lat, lon);
    }

    // tracts: uniform centroids, uniform log density, area 1..4 sq mi
    let mut tracts: Vec<TractRecord> = Vec::with_capacity(spec.n_tracts);
    for i in 0..spec.n_tracts {
        let lat = rng.random_range(spec.lat_min..spec.lat_max);
        let lon = rng.random_range(spec.lon_min..spec.lon_max);
        let log_density = rng.random_range(spec.log_density_min..spec.log_density_max);
        let land_area_sqmi = rng.random_range(1.0..4.0);
        let population = (log_density.exp() * land_area_sqmi).round();
        tracts.push(TractRecord {
            geoid: format!("T{i:06}"),
            lat,
            lon,
            population,
            land_area_sqmi,
            deprivation: 0.0,
        });
    }

    // deprivation rides on local bank density, plus noise
    let index = GeoIndex::build(&banks, DEPRIVATION_RADIUS_MILES);
    let area = circle_area_sq_miles(DEPRIVATION_RADIUS_MILES);
    let noise = Normal::new(0.0, spec.deprivation_noise_sd)
        .map_err(|e| Error::LandscapeSpec(format!("normal: {e}")))?;
    for t in tracts.iter_mut() {
        let count = index.count_within(t.lat, t.lon, &[DEPRIVATION_RADIUS_MILES])[0];
        let density = count as f64 / area;
        t.deprivation = spec.deprivation_coeff * density + noise.sample(&mut rng);
    }

    Ok(Landscape { banks, tracts })
}

/// Bank points as CSV in the default ingest schema.
pub fn banks_to_csv(banks: &[BankPoint]) -> String {
    let mut out = String::from("id,latitude,longitude\n");
    for b in banks {
        out.push_str(&format!("{},{},{}\n", b.id, b.lat, b.lon));
    }
    out
}

/// Tracts as CSV in the default ingest schema.
pub fn tracts_to_csv(tracts: &[TractRecord]) -> String {
    let mut out =
        String::from("geoid,centroid_lat,centroid_lon,population,land_area_sqmi,deprivation\n");
    for t in tracts {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.geoid, t.lat, t.lon, t.population, t.land_area_sqmi, t.deprivation
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_radius_schedule;
    use crate::ingest::{parse_banks, parse_tracts, BankSchema, TractSchema};
    use crate::spatial::{density_profile, profile_tracts};
    use crate::stats::spearman;

    #[test]
    fn same_seed_reproduces_exactly() {
        let spec = LandscapeSpec::default();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate(&LandscapeSpec::default()).unwrap();
        let b = generate(&LandscapeSpec {
            seed: 1,
            ..LandscapeSpec::default()
        })
        .unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn everything_stays_in_the_box() {
        let spec = LandscapeSpec {
            seed: 7,
            cluster_sd_miles: 30.0, // push displacement hard against the box
            ..LandscapeSpec::default()
        };
        let l = generate(&spec).unwrap();
        assert!(!l.banks.is_empty());
        for b in &l.banks {
            assert!(b.lat >= spec.lat_min && b.lat <= spec.lat_max, "{}", b.id);
            assert!(b.lon >= spec.lon_min && b.lon <= spec.lon_max, "{}", b.id);
        }
        for t in &l.tracts {
            assert!(t.lat >= spec.lat_min && t.lat <= spec.lat_max, "{}", t.geoid);
            assert!(t.lon >= spec.lon_min && t.lon <= spec.lon_max, "{}", t.geoid);
        }
    }

    #[test]
    fn ids_are_unique_and_ordered() {
        let l = generate(&LandscapeSpec::default()).unwrap();
        for (i, b) in l.banks.iter().enumerate() {
            assert_eq!(b.id, format!("B{i:06}"));
        }
        for (i, t) in l.tracts.iter().enumerate() {
            assert_eq!(t.geoid, format!("T{i:06}"));
        }
    }

    #[test]
    fn clusters_add_banks_beyond_background() {
        let l = generate(&LandscapeSpec::default()).unwrap();
        // 12 clusters * mean 40 should land well above 150 + 100
        assert!(
            l.banks.len() > 150 + 100,
            "only {} banks generated",
            l.banks.len()
        );
    }

    #[test]
    fn population_matches_drawn_log_density() {
        let l = generate(&LandscapeSpec::default()).unwrap();
        for t in &l.tracts {
            assert!(t.population >= 0.0);
            assert_eq!(t.population, t.population.round());
            assert!(t.land_area_sqmi >= 1.0 && t.land_area_sqmi < 4.0);
            // round(exp(logd) * area) stays within the drawn range's hull
            let implied = (t.population / t.land_area_sqmi).ln();
            if t.population > 0.0 {
                assert!(implied < 9.1, "{}: {implied}", t.geoid);
            }
        }
    }

    #[test]
    fn negative_coefficient_yields_negative_correlation() {
        // a compact box, so the 2-mile circles of most tracts actually
        // contain banks and the density signal isn't drowned in zeros
        let spec = LandscapeSpec {
            seed: 11,
            lat_min: 39.0,
            lat_max: 40.0,
            lon_min: -90.0,
            lon_max: -89.0,
            n_tracts: 600,
            deprivation_coeff: -1.0,
            deprivation_noise_sd: 0.02,
            ..LandscapeSpec::default()
        };
        let l = generate(&spec).unwrap();
        let schedule = default_radius_schedule();
        let index = GeoIndex::build(&l.banks, 20.0);
        let profiles: Vec<_> = profile_tracts(&index, &l.tracts, &schedule)
            .iter()
            .map(|c| density_profile(c, &schedule))
            .collect();
        let col = 7; // 2.0 miles
        assert!((schedule[col] - 2.0).abs() < 1e-12);
        let density: Vec<f64> = profiles.iter().map(|p| p.densities[col]).collect();
        let deprivation: Vec<f64> = l.tracts.iter().map(|t| t.deprivation).collect();
        let rho = spearman(&density, &deprivation).unwrap();
        assert!(rho < -0.5, "rho {rho}");
    }

    #[test]
    fn csv_round_trips_through_ingest() {
        let l = generate(&LandscapeSpec {
            n_tracts: 50,
            ..LandscapeSpec::default()
        })
        .unwrap();
        let banks = parse_banks(
            banks_to_csv(&l.banks).as_bytes(),
            &BankSchema::default(),
            "banks",
        )
        .unwrap();
        assert_eq!(banks.dropped, 0);
        assert_eq!(banks.records, l.banks);
        let tracts = parse_tracts(
            tracts_to_csv(&l.tracts).as_bytes(),
            &TractSchema::default(),
            "tracts",
        )
        .unwrap();
        assert_eq!(tracts.dropped, 0);
        assert_eq!(tracts.records, l.tracts);
    }

    #[test]
    fn bankless_landscape_is_fine() {
        let spec = LandscapeSpec {
            n_clusters: 0,
            background_points: 0,
            ..LandscapeSpec::default()
        };
        let l = generate(&spec).unwrap();
        assert!(l.banks.is_empty());
        assert_eq!(l.tracts.len(), 400);
        for t in &l.tracts {
            // deprivation reduces to pure noise
            assert!(t.deprivation.abs() < 1.0, "{}", t.geoid);
        }
    }

    #[test]
    fn bad_specs_are_rejected() {
        let cases: Vec<(&str, LandscapeSpec)> = vec![
            (
                "inverted box",
                LandscapeSpec {
                    lat_min: 42.0,
                    lat_max: 38.0,
                    ..LandscapeSpec::default()
                },
            ),
            (
                "polar",
                LandscapeSpec {
                    lat_min: 70.0,
                    lat_max: 80.0,
                    ..LandscapeSpec::default()
                },
            ),
            (
                "no tracts",
                LandscapeSpec {
                    n_tracts: 0,
                    ..LandscapeSpec::default()
                },
            ),
            (
                "negative sd",
                LandscapeSpec {
                    cluster_sd_miles: -1.0,
                    ..LandscapeSpec::default()
                },
            ),
            (
                "flat log density range",
                LandscapeSpec {
                    log_density_min: 5.0,
                    log_density_max: 5.0,
                    ..LandscapeSpec::default()
                },
            ),
        ];
        for (name, spec) in cases {
            assert!(
                matches!(generate(&spec).unwrap_err(), Error::LandscapeSpec(_)),
                "{name} should be rejected"
            );
        }
    }
}
